// End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
// the process exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mcinet/data.hpp"
#include "mcinet/figure.hpp"
#include "mcinet/gradcheck.hpp"
#include "mcinet/graph.hpp"
#include "mcinet/train.hpp"
#include "mcinet/zoo.hpp"

using namespace mcinet;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int num, const std::string& label, bool ok, const std::string& detail = "") {
    std::printf("criterion %d: %s  %s%s%s\n", num, ok ? "PASS" : "FAIL", label.c_str(),
                detail.empty() ? "" : "  ", detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

void run(int num, const std::string& label, const std::function<std::pair<bool, std::string>()>& fn) {
    try {
        auto [ok, detail] = fn();
        report(num, label, ok, detail);
    } catch (const std::exception& e) {
        report(num, label, false, std::string("exception: ") + e.what());
    }
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

data::DatasetManifest tiny_corpus(const std::string& dir, std::size_t per_class, std::uint64_t seed,
                                  std::size_t image_size) {
    fs::remove_all(dir);
    return data::synth_dataset(per_class, seed, dir, image_size);
}

// --- criterion 1: four-architecture comparison on a small corpus ---

std::pair<bool, std::string> crit_compare() {
    const auto m = tiny_corpus("acc_c1", 2, 31, 32);
    train::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    const std::vector<zoo::ArchitectureId> archs = {
        zoo::ArchitectureId::alexnet, zoo::ArchitectureId::vgg16, zoo::ArchitectureId::googlenet,
        zoo::ArchitectureId::resnet18};
    const train::ComparisonReport rep = train::compare(archs, m, cfg);
    if (rep.rows.size() != 4) return {false, "expected 4 rows, got " + std::to_string(rep.rows.size())};
    std::set<std::string> names;
    for (std::size_t i = 0; i < rep.rows.size(); ++i) {
        names.insert(rep.rows[i].architecture);
        if (rep.rows[i].params == 0) return {false, "zero param count for " + rep.rows[i].architecture};
        if (i > 0 && rep.rows[i].subject_accuracy > rep.rows[i - 1].subject_accuracy)
            return {false, "rows not sorted by subject accuracy"};
    }
    if (names.size() != 4) return {false, "duplicate architecture rows"};
    const std::string csv = train::comparison_csv(rep);
    std::size_t lines = 0;
    for (char c : csv)
        if (c == '\n') ++lines;
    if (lines != 5) return {false, "csv should have header + 4 rows"};
    fs::remove_all("acc_c1");
    return {true, "4 architectures ranked"};
}

// --- criterion 2: gradient suite over every layer type ---

std::pair<bool, std::string> crit_gradients() {
    const auto t0 = Clock::now();
    const auto suite = nn::run_gradient_suite(20, 7);
    double worst = 0.0;
    std::string worst_layer;
    for (const auto& e : suite) {
        if (e.instances < 20) return {false, e.layer + " ran fewer than 20 instances"};
        if (e.max_rel_err > worst) {
            worst = e.max_rel_err;
            worst_layer = e.layer;
        }
    }
    const double secs = seconds_since(t0);
    if (suite.size() < 11) return {false, "suite covers too few layer types"};
    if (worst >= 1e-4) return {false, worst_layer + " rel err " + fmt("%.3e", worst)};
    if (secs >= 120.0) return {false, "took " + fmt("%.1f", secs) + "s"};
    return {true, "worst rel err " + fmt("%.2e", worst) + " in " + fmt("%.1f", secs) + "s"};
}

// --- criterion 3: im2col convolution against the direct oracle ---

std::pair<bool, std::string> crit_conv_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1, 1);
    double worst = 0.0;
    int done = 0;
    while (done < 100) {
        const std::size_t n = 1 + rng() % 2, cin = 1 + rng() % 4, cout = 1 + rng() % 4;
        const std::size_t h = 3 + rng() % 10, w = 3 + rng() % 10;
        const std::size_t k = 1 + rng() % 5, s = 1 + rng() % 3, p = rng() % 3;
        if (k > h + 2 * p || k > w + 2 * p) continue;
        Tensor x({n, cin, h, w});
        for (auto& v : x.values()) v = u(rng);
        nn::LayerParams lp;
        lp.weights = Tensor({cout, cin, k, k});
        for (auto& v : lp.weights.values()) v = u(rng);
        lp.bias.resize(cout);
        for (auto& v : lp.bias) v = u(rng);
        const Tensor fast = nn::conv2d(x, lp, s, p);
        const Tensor slow = nn::conv2d_naive(x, lp, s, p);
        for (std::size_t i = 0; i < fast.numel(); ++i)
            worst = std::max(worst, std::abs(fast[i] - slow[i]));
        ++done;
    }
    const double secs = seconds_since(t0);
    if (worst > 1e-10) return {false, "max abs diff " + fmt("%.3e", worst)};
    if (secs >= 60.0) return {false, "took " + fmt("%.1f", secs) + "s"};
    return {true, "100 geometries, max abs diff " + fmt("%.2e", worst)};
}

// --- criterion 4: architecture censuses ---

std::pair<bool, std::string> crit_census() {
    const auto a = graph::census(zoo::build_alexnet(1000, 1));
    if (a.count("conv") != 5 || a.count("fc") != 3) return {false, "alexnet census"};
    const auto v = graph::census(zoo::build_vgg16(1000, 1));
    if (v.count("conv") != 13 || v.count("fc") != 3) return {false, "vgg16 census"};
    const auto r = graph::census(zoo::build_resnet18(1000, 1));
    if (r.count("conv") != 20 || r.count("fc") != 1 || r.count("batchnorm") != 20)
        return {false, "resnet18 census"};

    auto gnet = zoo::build_googlenet(1000, 1);
    const auto g = graph::census(gnet);
    if (g.count("concat") != 9 || g.count("fc") != 1) return {false, "googlenet census"};
    // every inception module mixes 1x1, 3x3 and 5x5 convolutions: walk each
    // concat's branches back to the shared module input and collect kernels
    std::map<std::string, std::size_t> successor_count;
    for (const auto& n : gnet.nodes())
        for (const auto& in : n.inputs) ++successor_count[in];
    for (const auto& n : gnet.nodes()) {
        if (n.kind != graph::LayerKind::concat) continue;
        std::set<std::size_t> kernels;
        std::vector<std::string> stack = n.inputs;
        std::set<std::string> seen;
        while (!stack.empty()) {
            const std::string id = stack.back();
            stack.pop_back();
            if (id == graph::kInputId || !seen.insert(id).second) continue;
            if (successor_count[id] > 1) continue; // module input, stop here
            const auto& node = gnet.node(id);
            if (node.kind == graph::LayerKind::conv) kernels.insert(node.geom.kernel_h);
            for (const auto& in : node.inputs) stack.push_back(in);
        }
        for (std::size_t k : {1, 3, 5})
            if (!kernels.count(k))
                return {false, n.id + " lacks a " + std::to_string(k) + "x" + std::to_string(k) +
                                   " branch"};
    }
    return {true, "alexnet 5/3, vgg16 13/3, googlenet 9 inception, resnet18 20/1"};
}

// --- criterion 5: inferred shapes match executed shapes ---

std::pair<bool, std::string> crit_shapes() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto arch : {zoo::ArchitectureId::alexnet, zoo::ArchitectureId::vgg16,
                      zoo::ArchitectureId::googlenet, zoo::ArchitectureId::resnet18}) {
        auto g = zoo::build(arch, 1000, 1);
        const auto inferred = graph::infer_shapes(g);
        std::vector<std::size_t> in_shape = {1};
        for (std::size_t d : g.input_shape()) in_shape.push_back(d);
        Tensor batch(in_shape);
        for (auto& v : batch.values()) v = u(rng);
        graph::ActivationCache cache;
        std::mt19937_64 drop_rng(1);
        graph::forward(g, batch, nn::Mode::eval, &drop_rng, &cache);
        for (const auto& [id, shape] : cache.output_shapes) {
            if (shape.empty() || shape[0] != 1)
                return {false, zoo::arch_name(arch) + "/" + id + ": batch dim missing"};
            const std::vector<std::size_t> executed(shape.begin() + 1, shape.end());
            if (inferred.at(id) != executed)
                return {false, zoo::arch_name(arch) + "/" + id + ": inferred " +
                                   shape_to_string(inferred.at(id)) + " vs executed " +
                                   shape_to_string(executed)};
        }
    }
    return {true, "all four architectures, every node"};
}

// --- criterion 6: small-sample overfit ---

std::pair<bool, std::string> crit_overfit() {
    auto m = tiny_corpus("acc_c6", 3, 17, 16);
    m.records.resize(16); // 16 training slices
    graph::ModelGraph g({3, 16, 16}, 2);
    std::mt19937_64 rng(3);
    graph::LayerNode conv;
    conv.id = "conv";
    conv.kind = graph::LayerKind::conv;
    conv.geom.kernel_h = conv.geom.kernel_w = 3;
    conv.geom.stride = 1;
    conv.geom.pad = 1;
    conv.params = nn::LayerParams{graph::he_uniform({8, 3, 3, 3}, 27, rng),
                                  std::vector<double>(8, 0.0), {}, {}};
    conv.inputs = {graph::kInputId};
    g.add_node(conv);
    graph::LayerNode rl;
    rl.id = "relu";
    rl.kind = graph::LayerKind::relu;
    rl.inputs = {"conv"};
    g.add_node(rl);
    graph::LayerNode pool;
    pool.id = "pool";
    pool.kind = graph::LayerKind::maxpool;
    pool.geom.kernel_h = pool.geom.kernel_w = 4;
    pool.geom.stride = 4;
    pool.inputs = {"relu"};
    g.add_node(pool);
    graph::LayerNode fc;
    fc.id = "fc";
    fc.kind = graph::LayerKind::fc;
    fc.geom.units = 2;
    fc.params = nn::LayerParams{graph::he_uniform({2, 8 * 4 * 4}, 128, rng),
                                std::vector<double>(2, 0.0), {}, {}};
    fc.inputs = {"pool"};
    g.add_node(fc);
    graph::LayerNode out;
    out.id = "out";
    out.kind = graph::LayerKind::softmax_output;
    out.inputs = {"fc"};
    g.add_node(out);

    train::TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.weight_decay = 0.0;
    cfg.epochs = 200;
    cfg.batch_size = 16;
    const data::NormStats stats = data::compute_norm_stats(m, 16, 16);
    const train::TrainHistory h = train::train_model(g, m, stats, cfg);
    for (std::size_t e = 0; e < h.epochs.size(); ++e)
        if (h.epochs[e].train_accuracy == 1.0 && h.epochs[e].mean_loss < 0.01) {
            fs::remove_all("acc_c6");
            return {true, "memorized 16 samples by epoch " + std::to_string(e + 1)};
        }
    return {false, "final loss " + fmt("%.4f", h.epochs.back().mean_loss) + ", accuracy " +
                       fmt("%.2f", h.epochs.back().train_accuracy)};
}

// --- criterion 7: desk-scale transfer run ---

std::pair<bool, std::string> crit_desk_scale() {
    const auto t0 = Clock::now();
    const auto m = tiny_corpus("acc_c7", 210, 41, 64);
    train::TrainConfig cfg;
    cfg.reduced = true;
    cfg.epochs = 4;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.01;
    const data::SplitResult split = data::subject_split(m, cfg.split_fraction, cfg.seeds.split);
    if (split.train.subject_ids().size() != 294 || split.test.subject_ids().size() != 126)
        return {false, "unexpected split sizes"};
    train::TransferResult res = train::run_transfer(zoo::ArchitectureId::alexnet, split.train, cfg);
    const train::EvalReport rep = train::evaluate(res.model, split.test, res.stats);
    const double secs = seconds_since(t0);
    fs::remove_all("acc_c7");
    if (rep.subject_accuracy < 0.90)
        return {false, "subject accuracy " + fmt("%.3f", rep.subject_accuracy)};
    if (secs >= 900.0) return {false, "took " + fmt("%.0f", secs) + "s"};
    return {true, "subject accuracy " + fmt("%.3f", rep.subject_accuracy) + " on 126 held-out subjects in " +
                      fmt("%.0f", secs) + "s"};
}

// --- criterion 8: byte-identical artifacts across reruns ---

std::pair<bool, std::string> crit_determinism() {
    const auto m = tiny_corpus("acc_c8", 4, 23, 16);
    train::TrainConfig cfg;
    cfg.reduced = true;
    cfg.epochs = 2;
    cfg.batch_size = 6;

    auto once = [&]() {
        const data::SplitResult split = data::subject_split(m, cfg.split_fraction, cfg.seeds.split);
        train::TransferResult res = train::run_transfer(zoo::ArchitectureId::alexnet, split.train, cfg);
        const train::EvalReport rep = train::evaluate(res.model, split.test, res.stats);
        const train::ComparisonReport cmp = train::compare({zoo::ArchitectureId::alexnet}, m, cfg);
        return std::tuple<std::string, std::string, std::string, std::string>(
            train::history_json(res.history), train::eval_report_json(rep),
            train::comparison_csv(cmp, false), figure::comparison_svg(cmp));
    };
    const auto a = once();
    const auto b = once();
    fs::remove_all("acc_c8");
    if (std::get<0>(a) != std::get<0>(b)) return {false, "training history differs"};
    if (std::get<1>(a) != std::get<1>(b)) return {false, "evaluation report differs"};
    if (std::get<2>(a) != std::get<2>(b)) return {false, "comparison csv differs"};
    if (std::get<3>(a) != std::get<3>(b)) return {false, "figure differs"};
    return {true, "history, report, csv and figure identical across reruns"};
}

// --- criterion 9: weight file roundtrip ---

std::pair<bool, std::string> crit_weights() {
    auto g = zoo::build_alexnet_small(1000, 19);
    std::vector<std::pair<std::string, std::vector<double>>> before;
    for (const auto& n : g.nodes())
        if (n.params && n.id != "fc8") before.emplace_back(n.id, n.params->weights.values());
    graph::replace_head(g, 2, 20);
    for (const auto& [id, vals] : before)
        if (g.node(id).params->weights.values() != vals)
            return {false, id + " changed under replace_head"};

    graph::save_weights(g, "acc_w1.nwts");
    auto g2 = zoo::build_alexnet_small(1000, 77);
    graph::replace_head(g2, 2, 78);
    graph::load_weights(g2, "acc_w1.nwts");
    graph::save_weights(g2, "acc_w2.nwts");
    auto slurp = [](const char* p) {
        std::ifstream f(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(f), {});
    };
    const bool same_bytes = slurp("acc_w1.nwts") == slurp("acc_w2.nwts");
    std::remove("acc_w1.nwts");
    std::remove("acc_w2.nwts");
    if (!same_bytes) return {false, "save -> load -> save is not byte-stable"};

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor batch({1, 3, 64, 64});
    for (auto& v : batch.values()) v = u(rng);
    const Tensor y1 = graph::forward(g, batch, nn::Mode::eval);
    const Tensor y2 = graph::forward(g2, batch, nn::Mode::eval);
    if (y1.values() != y2.values()) return {false, "forward differs after roundtrip"};
    return {true, "byte-stable files, bitwise-equal forward"};
}

// --- criterion 10: freeze contract under training ---

std::pair<bool, std::string> crit_freeze() {
    const auto m = tiny_corpus("acc_c10", 2, 29, 16);
    auto g = zoo::build_alexnet_small(2, 33);
    std::map<std::string, std::vector<double>> conv_before, fc_before;
    for (const auto& n : g.nodes()) {
        if (!n.params) continue;
        if (n.kind == graph::LayerKind::conv) conv_before[n.id] = n.params->weights.values();
        if (n.kind == graph::LayerKind::fc) fc_before[n.id] = n.params->weights.values();
    }
    graph::freeze_through(g, "conv5");
    train::TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 6;
    const data::NormStats stats = data::compute_norm_stats(m, 64, 64);
    train::train_model(g, m, stats, cfg);
    fs::remove_all("acc_c10");
    for (const auto& [id, vals] : conv_before)
        if (g.node(id).params->weights.values() != vals)
            return {false, id + " moved despite being frozen"};
    for (const auto& [id, vals] : fc_before)
        if (g.node(id).params->weights.values() == vals)
            return {false, id + " did not move despite being trainable"};
    return {true, "frozen convs bitwise stable, head weights updated"};
}

} // namespace

int main() {
    run(1, "four-architecture comparison report", crit_compare);
    run(2, "gradient checks across all layer types", crit_gradients);
    run(3, "convolution matches the direct oracle", crit_conv_oracle);
    run(4, "architecture censuses", crit_census);
    run(5, "shape inference matches execution", crit_shapes);
    run(6, "16-sample overfit", crit_overfit);
    run(7, "desk-scale transfer accuracy", crit_desk_scale);
    run(8, "deterministic artifacts", crit_determinism);
    run(9, "weight file roundtrip", crit_weights);
    run(10, "freeze contract", crit_freeze);
    if (g_failures) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mcinet/data.hpp"
#include "mcinet/figure.hpp"
#include "mcinet/gradcheck.hpp"
#include "mcinet/graph.hpp"
#include "mcinet/train.hpp"
#include "mcinet/zoo.hpp"

namespace fs = std::filesystem;
using namespace mcinet;

namespace {

void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << content;
}

void save_stats(const data::NormStats& s, const std::string& path) {
    nlohmann::ordered_json j;
    j["mean"] = {s.mean[0], s.mean[1], s.mean[2]};
    j["stddev"] = {s.stddev[0], s.stddev[1], s.stddev[2]};
    j["degenerate"] = s.degenerate;
    write_file(path, j.dump(2) + "\n");
}

data::NormStats load_stats(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open stats file " + path);
    const auto j = nlohmann::json::parse(is);
    data::NormStats s;
    for (int c = 0; c < 3; ++c) {
        s.mean[c] = j.at("mean").at(c);
        s.stddev[c] = j.at("stddev").at(c);
    }
    s.degenerate = j.value("degenerate", false);
    return s;
}

graph::ModelGraph rebuild_for_weights(const std::string& arch_name, bool reduced,
                                      const train::TrainConfig& cfg, const std::string& weights) {
    const auto arch = zoo::arch_from_name(arch_name);
    graph::ModelGraph g = (reduced && arch == zoo::ArchitectureId::alexnet)
                              ? zoo::build_alexnet_small(1000, cfg.seeds.init)
                              : zoo::build(arch, 1000, cfg.seeds.init);
    graph::replace_head(g, 2, cfg.seeds.init + 1);
    graph::load_weights(g, weights);
    return g;
}

struct ConfigFlags {
    std::string config_file;
    double lr = 0, momentum = -1, weight_decay = -1, fraction = 0;
    long long epochs = -1, batch = -1;
    long long seed_split = -1, seed_shuffle = -1, seed_init = -1, seed_dropout = -1;
    std::string freeze_boundary;
    bool reduced = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON config file (defaults < file < flags)");
        cmd->add_option("--lr", lr, "learning rate");
        cmd->add_option("--momentum", momentum, "momentum in [0,1)");
        cmd->add_option("--weight-decay", weight_decay, "weight decay");
        cmd->add_option("--epochs", epochs, "training epochs");
        cmd->add_option("--batch", batch, "batch size");
        cmd->add_option("--fraction", fraction, "train split fraction");
        cmd->add_option("--freeze", freeze_boundary, "freeze boundary node id (default: last conv)");
        cmd->add_option("--seed-split", seed_split, "subject split seed");
        cmd->add_option("--seed-shuffle", seed_shuffle, "batch shuffle seed");
        cmd->add_option("--seed-init", seed_init, "weight init seed");
        cmd->add_option("--seed-dropout", seed_dropout, "dropout mask seed");
        cmd->add_flag("--reduced", reduced, "use the 64x64 AlexNet variant");
    }

    train::TrainConfig resolve() const {
        train::TrainConfig cfg;
        if (!config_file.empty()) cfg = train::TrainConfig::from_json_file(config_file);
        if (lr > 0) cfg.learning_rate = lr;
        if (momentum >= 0) cfg.momentum = momentum;
        if (weight_decay >= 0) cfg.weight_decay = weight_decay;
        if (epochs >= 0) cfg.epochs = static_cast<std::size_t>(epochs);
        if (batch >= 0) cfg.batch_size = static_cast<std::size_t>(batch);
        if (fraction > 0) cfg.split_fraction = fraction;
        if (!freeze_boundary.empty()) cfg.freeze_boundary = freeze_boundary;
        if (seed_split >= 0) cfg.seeds.split = static_cast<std::uint64_t>(seed_split);
        if (seed_shuffle >= 0) cfg.seeds.shuffle = static_cast<std::uint64_t>(seed_shuffle);
        if (seed_init >= 0) cfg.seeds.init = static_cast<std::uint64_t>(seed_init);
        if (seed_dropout >= 0) cfg.seeds.dropout = static_cast<std::uint64_t>(seed_dropout);
        if (reduced) cfg.reduced = true;
        cfg.validate();
        std::cout << "config: " << cfg.to_json() << "\n";
        return cfg;
    }
};

int run(int argc, char** argv) {
    CLI::App app{"from-scratch CNN engine and MCI/Normal classification pipeline"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    std::string synth_out = "synth_data";
    long long synth_n = 210, synth_seed = 1, synth_size = 64;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--per-class", synth_n, "subjects per class");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_option("--size", synth_size, "image size in pixels");

    // split
    auto* split = app.add_subcommand("split", "subject-level train/test split");
    std::string split_manifest, split_out = ".";
    double split_fraction = 0.7;
    long long split_seed = 1;
    split->add_option("--manifest", split_manifest, "manifest CSV")->required();
    split->add_option("--fraction", split_fraction, "train fraction");
    split->add_option("--seed", split_seed, "split seed");
    split->add_option("--out", split_out, "output directory");

    // train
    auto* tr = app.add_subcommand("train", "transfer-train an architecture on a train manifest");
    std::string tr_manifest, tr_arch = "alexnet", tr_out = "run";
    ConfigFlags tr_cfg;
    tr->add_option("--manifest", tr_manifest, "training manifest CSV")->required();
    tr->add_option("--arch", tr_arch, "alexnet|vgg16|googlenet|resnet18");
    tr->add_option("--out", tr_out, "output directory");
    tr_cfg.attach(tr);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate trained weights on a manifest");
    std::string ev_manifest, ev_arch = "alexnet", ev_weights, ev_stats, ev_out = "run";
    ConfigFlags ev_cfg;
    ev->add_option("--manifest", ev_manifest, "test manifest CSV")->required();
    ev->add_option("--arch", ev_arch, "architecture name");
    ev->add_option("--weights", ev_weights, "NWTS weight file")->required();
    ev->add_option("--stats", ev_stats, "normalization stats JSON")->required();
    ev->add_option("--out", ev_out, "output directory");
    ev_cfg.attach(ev);

    // compare
    auto* cmp = app.add_subcommand("compare", "train and evaluate several architectures");
    std::string cmp_manifest, cmp_out = "run";
    std::vector<std::string> cmp_archs = {"alexnet", "vgg16", "googlenet", "resnet18"};
    bool cmp_no_timing = false;
    ConfigFlags cmp_cfg;
    cmp->add_option("--manifest", cmp_manifest, "full dataset manifest CSV")->required();
    cmp->add_option("--archs", cmp_archs, "architectures to compare")->delimiter(',');
    cmp->add_option("--out", cmp_out, "output directory");
    cmp->add_flag("--no-timing", cmp_no_timing,
                  "write train_seconds as 0 so reruns are byte-identical");
    cmp_cfg.attach(cmp);

    // predict
    auto* pr = app.add_subcommand("predict", "classify a single slice image");
    std::string pr_arch = "alexnet", pr_weights, pr_stats, pr_image;
    ConfigFlags pr_cfg;
    pr->add_option("--arch", pr_arch, "architecture name");
    pr->add_option("--weights", pr_weights, "NWTS weight file")->required();
    pr->add_option("--stats", pr_stats, "normalization stats JSON")->required();
    pr->add_option("--image", pr_image, "PGM/PPM/.nt image")->required();
    pr_cfg.attach(pr);

    // inspect
    auto* ins = app.add_subcommand("inspect", "print architecture census and per-node shapes");
    std::string ins_arch = "alexnet";
    long long ins_classes = 1000;
    bool ins_reduced = false;
    ins->add_option("--arch", ins_arch, "architecture name");
    ins->add_option("--classes", ins_classes, "class count");
    ins->add_flag("--reduced", ins_reduced, "use the 64x64 AlexNet variant");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    bool gc_all = false;
    long long gc_instances = 20, gc_seed = 7;
    gc->add_flag("--all", gc_all, "run every layer type (default behavior)");
    gc->add_option("--instances", gc_instances, "random instances per layer");
    gc->add_option("--seed", gc_seed, "suite seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (synth->parsed()) {
        const auto m = data::synth_dataset(static_cast<std::size_t>(synth_n),
                                           static_cast<std::uint64_t>(synth_seed), synth_out,
                                           static_cast<std::size_t>(synth_size));
        const auto summary = m.class_summary();
        std::cout << "config: {\"per_class\":" << synth_n << ",\"seed\":" << synth_seed
                  << ",\"size\":" << synth_size << "}\n";
        std::cout << "wrote " << m.records.size() << " images (" << summary.at("normal")
                  << " normal / " << summary.at("mci") << " mci subjects) under " << synth_out << "\n";
        return 0;
    }
    if (split->parsed()) {
        std::cout << "config: {\"fraction\":" << split_fraction << ",\"seed\":" << split_seed << "}\n";
        const auto m = data::load_manifest(split_manifest);
        const auto s = data::subject_split(m, split_fraction, static_cast<std::uint64_t>(split_seed));
        fs::create_directories(split_out);
        data::save_manifest(s.train, (fs::path(split_out) / "train.csv").string());
        data::save_manifest(s.test, (fs::path(split_out) / "test.csv").string());
        std::cout << "train subjects: " << s.train.subject_ids().size()
                  << ", test subjects: " << s.test.subject_ids().size()
                  << ", fingerprint: " << data::split_fingerprint(s) << "\n";
        return 0;
    }
    if (tr->parsed()) {
        const auto cfg = tr_cfg.resolve();
        const auto m = data::load_manifest(tr_manifest);
        auto result = train::run_transfer(zoo::arch_from_name(tr_arch), m, cfg);
        fs::create_directories(tr_out);
        graph::save_weights(result.model, (fs::path(tr_out) / "model.nwts").string());
        save_stats(result.stats, (fs::path(tr_out) / "stats.json").string());
        write_file((fs::path(tr_out) / "history.json").string(),
                   train::history_json(result.history) + "\n");
        write_file((fs::path(tr_out) / "config.json").string(), cfg.to_json() + "\n");
        std::cout << "final epoch loss " << result.history.epochs.back().mean_loss
                  << ", train accuracy " << result.history.epochs.back().train_accuracy << "\n";
        return 0;
    }
    if (ev->parsed()) {
        const auto cfg = ev_cfg.resolve();
        auto g = rebuild_for_weights(ev_arch, cfg.reduced, cfg, ev_weights);
        const auto stats = load_stats(ev_stats);
        const auto m = data::load_manifest(ev_manifest);
        const auto report = train::evaluate(g, m, stats, cfg.batch_size);
        fs::create_directories(ev_out);
        write_file((fs::path(ev_out) / "eval.json").string(), train::eval_report_json(report) + "\n");
        std::cout << "subject accuracy " << report.subject_accuracy << ", slice accuracy "
                  << report.slice_accuracy << "\n";
        return 0;
    }
    if (cmp->parsed()) {
        const auto cfg = cmp_cfg.resolve();
        const auto m = data::load_manifest(cmp_manifest);
        std::vector<zoo::ArchitectureId> archs;
        for (const auto& a : cmp_archs) archs.push_back(zoo::arch_from_name(a));
        const auto report = train::compare(archs, m, cfg);
        fs::create_directories(cmp_out);
        write_file((fs::path(cmp_out) / "comparison.csv").string(),
                   train::comparison_csv(report, !cmp_no_timing));
        write_file((fs::path(cmp_out) / "comparison.json").string(),
                   train::comparison_json(report, !cmp_no_timing) + "\n");
        figure::emit_comparison_figure(report, (fs::path(cmp_out) / "figure.svg").string());
        for (const auto& row : report.rows)
            std::cout << row.architecture << ": subject accuracy " << row.subject_accuracy << "\n";
        return 0;
    }
    if (pr->parsed()) {
        const auto cfg = pr_cfg.resolve();
        auto g = rebuild_for_weights(pr_arch, cfg.reduced, cfg, pr_weights);
        const auto stats = load_stats(pr_stats);
        const auto p = train::predict(g, data::decode_image(pr_image), stats);
        std::cout << data::label_name(p.label) << " " << p.probability << "\n";
        return 0;
    }
    if (ins->parsed()) {
        std::cout << "config: {\"arch\":\"" << ins_arch << "\",\"classes\":" << ins_classes << "}\n";
        const auto arch = zoo::arch_from_name(ins_arch);
        graph::ModelGraph g =
            (ins_reduced && arch == zoo::ArchitectureId::alexnet)
                ? zoo::build_alexnet_small(static_cast<std::size_t>(ins_classes))
                : zoo::build(arch, static_cast<std::size_t>(ins_classes));
        const auto c = graph::census(g);
        std::cout << "census: conv=" << c.count("conv") << " fc=" << c.count("fc")
                  << " params=" << c.total_params << "\n";
        if (arch == zoo::ArchitectureId::resnet18)
            std::cout << "note: canonical resnet18 census (20 conv, 1 fc) differs from the "
                         "16-conv/2-fc description sometimes quoted for this network\n";
        std::cout << graph::summary_json(g) << "\n";
        return 0;
    }
    if (gc->parsed()) {
        std::cout << "config: {\"instances\":" << gc_instances << ",\"seed\":" << gc_seed << "}\n";
        const auto suite = nn::run_gradient_suite(static_cast<std::size_t>(gc_instances),
                                                  static_cast<std::uint64_t>(gc_seed));
        bool ok = true;
        for (const auto& e : suite) {
            const bool pass = e.max_rel_err < 1e-4;
            ok = ok && pass;
            std::cout << (pass ? "PASS " : "FAIL ") << e.layer << " max_rel_err=" << e.max_rel_err
                      << " (" << e.instances << " instances)\n";
        }
        return ok ? 0 : 3;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const train::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

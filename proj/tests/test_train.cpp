#include <doctest.h>

#include <stdexcept>
#include <string>

#include <cmath>
#include <filesystem>

#include "mcinet/train.hpp"

using namespace mcinet;
using namespace mcinet::train;
namespace fs = std::filesystem;

namespace {

// input (3,1,1) -> fc [[1,0,0],[2,0,0]] -> logits (x, 2x), where x is the
// replicated gray value. Positive pixels vote mci, negative vote normal.
graph::ModelGraph sign_probe_graph() {
    graph::ModelGraph g({3, 1, 1}, 2);
    graph::LayerNode fc;
    fc.id = "fc";
    fc.kind = graph::LayerKind::fc;
    fc.params = nn::LayerParams{Tensor({2, 3}, {1, 0, 0, 2, 0, 0}), {0, 0}, {}, {}};
    fc.inputs = {graph::kInputId};
    g.add_node(fc);
    graph::LayerNode out;
    out.id = "out";
    out.kind = graph::LayerKind::softmax_output;
    out.inputs = {"fc"};
    g.add_node(out);
    return g;
}

void write_scalar_nt(const std::string& path, double v) {
    save_nt(Tensor({1, 1, 1, 1}, {v}), path);
}

graph::ModelGraph single_weight_graph(double w0) {
    graph::ModelGraph g({1, 1, 1}, 2);
    graph::LayerNode fc;
    fc.id = "fc";
    fc.kind = graph::LayerKind::fc;
    fc.params = nn::LayerParams{Tensor({2, 1}, {w0, 0.0}), {0, 0}, {}, {}};
    fc.inputs = {graph::kInputId};
    g.add_node(fc);
    graph::LayerNode out;
    out.id = "out";
    out.kind = graph::LayerKind::softmax_output;
    out.inputs = {"fc"};
    g.add_node(out);
    return g;
}

} // namespace

TEST_CASE("config validation and JSON roundtrip") {
    TrainConfig cfg;
    cfg.validate();
    cfg.learning_rate = 0.123;
    cfg.epochs = 7;
    cfg.freeze_boundary = "conv5";
    TrainConfig other;
    other.apply_json(cfg.to_json());
    CHECK(other.learning_rate == 0.123);
    CHECK(other.epochs == 7);
    CHECK(other.freeze_boundary == "conv5");
    CHECK(other.to_json() == cfg.to_json());

    TrainConfig bad;
    bad.learning_rate = -1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainConfig{};
    bad.split_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainConfig{};
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = TrainConfig{};
    bad.momentum = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("momentum step follows the hand-traced sequence") {
    // loss 0.5*w^2, gradient w; lr 0.1, momentum 0.9, no decay:
    // w: 1 -> 0.9 -> 0.72
    auto g = single_weight_graph(1.0);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.momentum = 0.9;
    cfg.weight_decay = 0.0;
    VelocityMap vel;
    auto step = [&]() {
        std::map<std::string, nn::GradBundle> grads;
        nn::GradBundle gb;
        gb.d_weights = Tensor({2, 1}, {g.node("fc").params->weights[0], 0.0});
        gb.d_bias = {0.0, 0.0};
        grads.emplace("fc", std::move(gb));
        sgd_momentum_step(g, grads, vel, cfg);
    };
    step();
    CHECK(g.node("fc").params->weights[0] == doctest::Approx(0.9).epsilon(1e-12));
    step();
    CHECK(g.node("fc").params->weights[0] == doctest::Approx(0.72).epsilon(1e-12));

    // weight decay folds into the gradient: v = -lr*(g + wd*w)
    auto g2 = single_weight_graph(1.0);
    cfg.weight_decay = 0.5;
    VelocityMap vel2;
    std::map<std::string, nn::GradBundle> grads;
    nn::GradBundle gb;
    gb.d_weights = Tensor({2, 1}, {1.0, 0.0});
    gb.d_bias = {0.0, 0.0};
    grads.emplace("fc", std::move(gb));
    sgd_momentum_step(g2, grads, vel2, cfg);
    CHECK(g2.node("fc").params->weights[0] == doctest::Approx(1.0 - 0.1 * 1.5).epsilon(1e-12));
}

TEST_CASE("history JSON is stable and carries no wall-clock fields") {
    TrainHistory h;
    h.epochs.push_back({0.6931, 0.5, 12.5});
    h.epochs.push_back({0.42, 0.9, 13.0});
    const std::string j = history_json(h);
    CHECK(j.find("0.6931") != std::string::npos);
    CHECK(j.find("12.5") == std::string::npos);
    CHECK(j.find("seconds") == std::string::npos);
    TrainHistory h2 = h;
    h2.epochs[0].wall_seconds = 99.0;
    CHECK(history_json(h2) == j);
}

TEST_CASE("comparison serialization respects the timing switch") {
    ComparisonReport r;
    r.rows.push_back({"alexnet", 0.93, 0.88, 1000, 12.345});
    r.rows.push_back({"vgg16", 0.91, 0.87, 2000, 99.5});
    r.split_fingerprint = 0xabcdef;
    const std::string csv = comparison_csv(r, true);
    CHECK(csv.find("architecture,subject_accuracy,slice_accuracy,params,train_seconds") == 0);
    CHECK(csv.find("12.345") != std::string::npos);
    const std::string csv_nt = comparison_csv(r, false);
    CHECK(csv_nt.find("12.345") == std::string::npos);
    // rerun with different timings but the same metrics is byte-identical
    ComparisonReport r2 = r;
    r2.rows[0].train_seconds = 77.7;
    CHECK(comparison_csv(r2, false) == csv_nt);
    CHECK(comparison_json(r2, false) == comparison_json(r, false));
}

TEST_CASE("evaluation aggregates slices by majority vote, ties to mci") {
    const fs::path dir = "tt_eval";
    fs::remove_all(dir);
    fs::create_directories(dir);
    // subject A (truth normal): one positive slice (mci vote), one negative
    // (normal vote) -> tie -> mci. subject B (truth normal): all negative.
    write_scalar_nt((dir / "a_f.nt").string(), 1.0);
    write_scalar_nt((dir / "a_s.nt").string(), -1.0);
    write_scalar_nt((dir / "b_f.nt").string(), -1.0);
    write_scalar_nt((dir / "b_s.nt").string(), -1.0);
    write_scalar_nt((dir / "b_a.nt").string(), -1.0);
    data::DatasetManifest m;
    m.records.push_back({"A", data::Label::normal, data::Plane::frontal, (dir / "a_f.nt").string()});
    m.records.push_back({"A", data::Label::normal, data::Plane::sagittal, (dir / "a_s.nt").string()});
    m.records.push_back({"B", data::Label::normal, data::Plane::frontal, (dir / "b_f.nt").string()});
    m.records.push_back({"B", data::Label::normal, data::Plane::sagittal, (dir / "b_s.nt").string()});
    m.records.push_back({"B", data::Label::normal, data::Plane::axial, (dir / "b_a.nt").string()});

    auto g = sign_probe_graph();
    data::NormStats stats; // identity normalization
    const EvalReport rep = evaluate(g, m, stats);
    CHECK(rep.slice_accuracy == doctest::Approx(4.0 / 5.0));
    CHECK(rep.subject_accuracy == doctest::Approx(0.5));
    CHECK(rep.confusion[0][0] == 1); // B correct
    CHECK(rep.confusion[0][1] == 1); // A tie-broken to mci
    CHECK(rep.confusion[1][0] == 0);
    CHECK(rep.confusion[1][1] == 0);
    REQUIRE(rep.subjects.size() == 2);
    for (const auto& s : rep.subjects)
        if (s.subject_id == "A") CHECK(s.predicted == data::Label::mci);

    const std::string j = eval_report_json(rep);
    CHECK(j.find("subject_accuracy") != std::string::npos);
    CHECK(j.find("confusion") != std::string::npos);

    // single-image prediction on a strongly positive pixel
    const Prediction p = predict(g, load_nt((dir / "a_f.nt").string()), stats);
    CHECK(p.label == data::Label::mci);
    CHECK(p.probability > 0.5);
    fs::remove_all(dir);
}

TEST_CASE("training declines the loss on a separable toy corpus") {
    const fs::path dir = "tt_train";
    fs::remove_all(dir);
    const data::DatasetManifest m = data::synth_dataset(3, 21, dir.string(), 16);
    auto g = zoo::build_alexnet_small(2, 5);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 6;
    cfg.learning_rate = 0.002;
    const data::NormStats stats = data::compute_norm_stats(m, 64, 64);
    const TrainHistory h = train_model(g, m, stats, cfg);
    REQUIRE(h.epochs.size() == 2);
    for (const auto& e : h.epochs) CHECK(std::isfinite(e.mean_loss));
    CHECK(h.epochs[1].mean_loss < h.epochs[0].mean_loss);

    // reruns from identical state reproduce the history bytes
    auto g2 = zoo::build_alexnet_small(2, 5);
    const TrainHistory h2 = train_model(g2, m, stats, cfg);
    CHECK(history_json(h2) == history_json(h));
    fs::remove_all(dir);
}

TEST_CASE("non-finite loss raises NumericError naming epoch and batch") {
    const fs::path dir = "tt_nan";
    fs::remove_all(dir);
    const data::DatasetManifest m = data::synth_dataset(1, 3, dir.string(), 16);
    auto g = zoo::build_alexnet_small(2, 5);
    g.node("fc8").params->weights[0] = std::nan("");
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 6;
    const data::NormStats stats = data::compute_norm_stats(m, 64, 64);
    try {
        train_model(g, m, stats, cfg);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("epoch") != std::string::npos);
        CHECK(msg.find("batch") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("run_transfer freezes the backbone and swaps the head") {
    const fs::path dir = "tt_transfer";
    fs::remove_all(dir);
    const data::DatasetManifest m = data::synth_dataset(2, 9, dir.string(), 16);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 6;
    cfg.reduced = true;
    const TransferResult res = run_transfer(zoo::ArchitectureId::alexnet, m, cfg);
    CHECK(res.model.class_count() == 2);
    CHECK_FALSE(res.model.node("conv1").trainable);
    CHECK_FALSE(res.model.node("conv5").trainable);
    CHECK(res.model.node("fc8").trainable);
    CHECK(res.model.node("fc8").params->weights.dim(0) == 2);
    CHECK(res.history.epochs.size() == 1);
    CHECK(res.train_seconds >= 0.0);
    fs::remove_all(dir);
}

#include "mcinet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mcinet::train {

using nlohmann::ordered_json;

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning_rate must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw std::invalid_argument("config: momentum must be in [0,1)");
    if (weight_decay < 0.0) throw std::invalid_argument("config: weight_decay must be non-negative");
    if (epochs == 0) throw std::invalid_argument("config: epochs must be positive");
    if (batch_size == 0) throw std::invalid_argument("config: batch_size must be positive");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw std::invalid_argument("config: split_fraction must be in (0,1)");
}

std::string TrainConfig::to_json() const {
    ordered_json j;
    j["learning_rate"] = learning_rate;
    j["momentum"] = momentum;
    j["weight_decay"] = weight_decay;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["freeze_boundary"] = freeze_boundary;
    j["split_fraction"] = split_fraction;
    j["reduced"] = reduced;
    j["seeds"] = {{"split", seeds.split},
                  {"shuffle", seeds.shuffle},
                  {"init", seeds.init},
                  {"dropout", seeds.dropout}};
    return j.dump();
}

void TrainConfig::apply_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    if (j.contains("learning_rate")) learning_rate = j["learning_rate"];
    if (j.contains("momentum")) momentum = j["momentum"];
    if (j.contains("weight_decay")) weight_decay = j["weight_decay"];
    if (j.contains("epochs")) epochs = j["epochs"];
    if (j.contains("batch_size")) batch_size = j["batch_size"];
    if (j.contains("freeze_boundary")) freeze_boundary = j["freeze_boundary"];
    if (j.contains("split_fraction")) split_fraction = j["split_fraction"];
    if (j.contains("reduced")) reduced = j["reduced"];
    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        if (s.contains("split")) seeds.split = s["split"];
        if (s.contains("shuffle")) seeds.shuffle = s["shuffle"];
        if (s.contains("init")) seeds.init = s["init"];
        if (s.contains("dropout")) seeds.dropout = s["dropout"];
    }
    validate();
}

TrainConfig TrainConfig::from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    TrainConfig cfg;
    cfg.apply_json(text);
    return cfg;
}

// wall_seconds stays out of the JSON: serialized history must be identical
// across reruns with the same seeds
std::string history_json(const TrainHistory& h) {
    ordered_json j = ordered_json::array();
    for (const auto& e : h.epochs)
        j.push_back({{"mean_loss", e.mean_loss}, {"train_accuracy", e.train_accuracy}});
    return ordered_json{{"epochs", j}}.dump(2);
}

std::string eval_report_json(const EvalReport& r) {
    ordered_json j;
    j["slice_accuracy"] = r.slice_accuracy;
    j["subject_accuracy"] = r.subject_accuracy;
    j["confusion_matrix"] = {{r.confusion[0][0], r.confusion[0][1]},
                             {r.confusion[1][0], r.confusion[1][1]}};
    ordered_json subs = ordered_json::array();
    for (const auto& s : r.subjects)
        subs.push_back({{"subject_id", s.subject_id},
                        {"truth", data::label_name(s.truth)},
                        {"predicted", data::label_name(s.predicted)},
                        {"probability", s.probability}});
    j["subjects"] = std::move(subs);
    return j.dump(2);
}

std::string comparison_json(const ComparisonReport& r, bool include_timing) {
    ordered_json j;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
        ordered_json jr;
        jr["architecture"] = row.architecture;
        jr["subject_accuracy"] = row.subject_accuracy;
        jr["slice_accuracy"] = row.slice_accuracy;
        jr["params"] = row.params;
        jr["train_seconds"] = include_timing ? row.train_seconds : 0.0;
        rows.push_back(std::move(jr));
    }
    j["rows"] = std::move(rows);
    j["split_fingerprint"] = r.split_fingerprint;
    j["config"] = r.config_json.empty() ? nlohmann::json(nullptr)
                                        : nlohmann::json::parse(r.config_json);
    return j.dump(2);
}

std::string comparison_csv(const ComparisonReport& r, bool include_timing) {
    std::string out = "architecture,subject_accuracy,slice_accuracy,params,train_seconds\n";
    char buf[256];
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%zu,%.3f\n", row.architecture.c_str(),
                      row.subject_accuracy, row.slice_accuracy, row.params,
                      include_timing ? row.train_seconds : 0.0);
        out += buf;
    }
    return out;
}

void sgd_momentum_step(graph::ModelGraph& g, const std::map<std::string, nn::GradBundle>& grads,
                       VelocityMap& velocity, const TrainConfig& cfg) {
    for (const auto& [id, gb] : grads) {
        auto& node = g.node(id);
        auto& p = *node.params;
        auto vit = velocity.find(id);
        if (vit == velocity.end()) {
            Velocity v;
            v.w = Tensor(p.weights.shape());
            v.b.assign(p.bias.size(), 0.0);
            vit = velocity.emplace(id, std::move(v)).first;
        }
        Velocity& v = vit->second;
        for (std::size_t i = 0; i < p.weights.numel(); ++i) {
            v.w[i] = cfg.momentum * v.w[i] -
                     cfg.learning_rate * (gb.d_weights[i] + cfg.weight_decay * p.weights[i]);
            p.weights[i] += v.w[i];
        }
        for (std::size_t i = 0; i < p.bias.size(); ++i) {
            v.b[i] = cfg.momentum * v.b[i] -
                     cfg.learning_rate * (gb.d_bias[i] + cfg.weight_decay * p.bias[i]);
            p.bias[i] += v.b[i];
        }
    }
}

TrainHistory train_model(graph::ModelGraph& g, const data::DatasetManifest& train_set,
                         const data::NormStats& stats, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.records.empty()) throw std::invalid_argument("train: empty training set");
    const std::size_t H = g.input_shape()[1], W = g.input_shape()[2];
    std::mt19937_64 dropout_rng(cfg.seeds.dropout);
    VelocityMap velocity;
    TrainHistory history;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto bs = data::batches(train_set, cfg.batch_size, cfg.seeds.shuffle + epoch, H, W, stats);
        double loss_sum = 0.0;
        std::size_t correct = 0, total = 0;
        std::size_t batch_idx = 0;
        for (const auto& b : bs) {
            graph::ActivationCache cache;
            const Tensor logits = graph::forward(g, b.images, nn::Mode::train, &dropout_rng, &cache);
            const auto res = nn::softmax_cross_entropy(logits, b.labels);
            if (!std::isfinite(res.loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_idx));
            loss_sum += res.loss * static_cast<double>(b.labels.size());
            const std::size_t K = logits.dim(1);
            for (std::size_t n = 0; n < b.labels.size(); ++n) {
                std::vector<double> row(logits.data() + n * K, logits.data() + (n + 1) * K);
                if (argmax(row) == b.labels[n]) ++correct;
            }
            total += b.labels.size();
            const Tensor d_logits = nn::softmax_cross_entropy_backward(res, b.labels);
            const auto grads = graph::backward(g, cache, d_logits);
            sgd_momentum_step(g, grads, velocity, cfg);
            ++batch_idx;
        }
        EpochStats e;
        e.mean_loss = loss_sum / static_cast<double>(total);
        e.train_accuracy = static_cast<double>(correct) / static_cast<double>(total);
        e.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.epochs.push_back(e);
    }
    return history;
}

EvalReport evaluate(graph::ModelGraph& g, const data::DatasetManifest& test_set,
                    const data::NormStats& stats, std::size_t batch_size) {
    const std::size_t H = g.input_shape()[1], W = g.input_shape()[2];
    const std::size_t K = g.class_count();
    EvalReport report;
    std::size_t slice_correct = 0;

    struct Vote {
        data::Label truth = data::Label::normal;
        std::size_t votes[2] = {0, 0};
        double prob_sum[2] = {0.0, 0.0};
        std::size_t slices = 0;
    };
    std::map<std::string, Vote> by_subject;
    std::vector<std::string> subject_order;

    const auto& recs = test_set.records;
    for (std::size_t start = 0; start < recs.size(); start += batch_size) {
        const std::size_t n = std::min(batch_size, recs.size() - start);
        Tensor batch({n, 3, H, W});
        for (std::size_t i = 0; i < n; ++i) {
            const Tensor img =
                data::to_network_input(data::decode_image(recs[start + i].image_path), H, W, stats);
            std::copy(img.data(), img.data() + img.numel(), batch.data() + i * 3 * H * W);
        }
        graph::ModelGraph& gm = g;
        const Tensor logits = graph::forward(gm, batch, nn::Mode::eval);
        const Tensor probs = nn::softmax(logits);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rec = recs[start + i];
            std::vector<double> row(probs.data() + i * K, probs.data() + (i + 1) * K);
            const std::size_t pred = argmax(row);
            if (pred == static_cast<std::size_t>(rec.label)) ++slice_correct;
            auto it = by_subject.find(rec.subject_id);
            if (it == by_subject.end()) {
                it = by_subject.emplace(rec.subject_id, Vote{}).first;
                it->second.truth = rec.label;
                subject_order.push_back(rec.subject_id);
            }
            Vote& v = it->second;
            v.votes[pred < 2 ? pred : 1]++;
            for (std::size_t k = 0; k < std::min<std::size_t>(2, K); ++k) v.prob_sum[k] += row[k];
            v.slices++;
        }
    }

    std::size_t subject_correct = 0;
    for (const auto& id : subject_order) {
        const Vote& v = by_subject.at(id);
        // majority vote over planes; ties go to mci (flag for review)
        const data::Label pred =
            v.votes[1] >= v.votes[0] ? data::Label::mci : data::Label::normal;
        SubjectPrediction sp;
        sp.subject_id = id;
        sp.truth = v.truth;
        sp.predicted = pred;
        sp.probability = v.prob_sum[static_cast<int>(pred)] / static_cast<double>(v.slices);
        report.subjects.push_back(sp);
        report.confusion[static_cast<int>(v.truth)][static_cast<int>(pred)]++;
        if (pred == v.truth) ++subject_correct;
    }
    report.slice_accuracy =
        recs.empty() ? 0.0 : static_cast<double>(slice_correct) / static_cast<double>(recs.size());
    report.subject_accuracy = subject_order.empty()
                                  ? 0.0
                                  : static_cast<double>(subject_correct) /
                                        static_cast<double>(subject_order.size());
    return report;
}

Prediction predict(graph::ModelGraph& g, const Tensor& image, const data::NormStats& stats) {
    const std::size_t H = g.input_shape()[1], W = g.input_shape()[2];
    Tensor in = data::to_network_input(image, H, W, stats);
    const Tensor logits = graph::forward(g, in, nn::Mode::eval);
    const Tensor probs = nn::softmax(logits);
    std::vector<double> row(probs.data(), probs.data() + probs.numel());
    Prediction p;
    const std::size_t idx = argmax(row);
    p.label = idx == 0 ? data::Label::normal : data::Label::mci;
    p.probability = row[idx];
    return p;
}

TransferResult run_transfer(zoo::ArchitectureId arch, const data::DatasetManifest& train_set,
                            const TrainConfig& cfg) {
    cfg.validate();
    TransferResult out;
    out.model = (cfg.reduced && arch == zoo::ArchitectureId::alexnet)
                    ? zoo::build_alexnet_small(1000, cfg.seeds.init)
                    : zoo::build(arch, 1000, cfg.seeds.init);
    graph::replace_head(out.model, 2, cfg.seeds.init + 1);
    const std::string boundary =
        cfg.freeze_boundary.empty() ? zoo::last_conv_id(out.model) : cfg.freeze_boundary;
    graph::freeze_through(out.model, boundary);
    const std::size_t H = out.model.input_shape()[1], W = out.model.input_shape()[2];
    out.stats = data::compute_norm_stats(train_set, H, W);
    const auto t0 = std::chrono::steady_clock::now();
    out.history = train_model(out.model, train_set, out.stats, cfg);
    out.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

ComparisonReport compare(const std::vector<zoo::ArchitectureId>& archs,
                         const data::DatasetManifest& dataset, const TrainConfig& cfg) {
    cfg.validate();
    const auto split = data::subject_split(dataset, cfg.split_fraction, cfg.seeds.split);
    ComparisonReport report;
    report.split_fingerprint = data::split_fingerprint(split);
    report.config_json = cfg.to_json();
    for (const auto arch : archs) {
        TransferResult tr = run_transfer(arch, split.train, cfg);
        const EvalReport er = evaluate(tr.model, split.test, tr.stats, cfg.batch_size);
        ComparisonRow row;
        row.architecture = zoo::arch_name(arch);
        row.subject_accuracy = er.subject_accuracy;
        row.slice_accuracy = er.slice_accuracy;
        row.params = graph::census(tr.model).total_params;
        row.train_seconds = tr.train_seconds;
        report.rows.push_back(std::move(row));
    }
    std::stable_sort(report.rows.begin(), report.rows.end(),
                     [](const ComparisonRow& a, const ComparisonRow& b) {
                         return a.subject_accuracy > b.subject_accuracy;
                     });
    return report;
}

} // namespace mcinet::train

#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcinet/data.hpp"
#include "mcinet/graph.hpp"
#include "mcinet/zoo.hpp"

namespace mcinet::train {

// Raised when the loss goes non-finite; carries the failing epoch/batch.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Seeds {
    std::uint64_t split = 1;
    std::uint64_t shuffle = 2;
    std::uint64_t init = 3;
    std::uint64_t dropout = 4;
};

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;
    std::string freeze_boundary; // node id; empty = last conv in the transfer flow
    Seeds seeds;
    double split_fraction = 0.7;
    bool reduced = false; // use the 64x64 AlexNet variant where applicable

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json_file(const std::string& path);
    void apply_json(const std::string& json_text);
};

struct EpochStats {
    double mean_loss = 0.0;
    double train_accuracy = 0.0;
    double wall_seconds = 0.0; // not serialized, see history_json
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
};

std::string history_json(const TrainHistory& h);

struct SubjectPrediction {
    std::string subject_id;
    data::Label truth = data::Label::normal;
    data::Label predicted = data::Label::normal;
    double probability = 0.0; // mean softmax prob of the predicted class over planes
};

struct EvalReport {
    double slice_accuracy = 0.0;
    double subject_accuracy = 0.0;
    // rows true, cols predicted, order [normal, mci]
    std::size_t confusion[2][2] = {{0, 0}, {0, 0}};
    std::vector<SubjectPrediction> subjects;
};

std::string eval_report_json(const EvalReport& r);

struct ComparisonRow {
    std::string architecture;
    double subject_accuracy = 0.0;
    double slice_accuracy = 0.0;
    std::size_t params = 0;
    double train_seconds = 0.0;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows; // sorted by subject accuracy, descending
    std::uint64_t split_fingerprint = 0;
    std::string config_json;
};

std::string comparison_json(const ComparisonReport& r, bool include_timing = true);
std::string comparison_csv(const ComparisonReport& r, bool include_timing = true);

// velocity state per parameterized node
struct Velocity {
    Tensor w;
    std::vector<double> b;
};
using VelocityMap = std::map<std::string, Velocity>;

// v <- mu*v - lr*(g + wd*p); p <- p + v. Trainable nodes only (the gradient
// map already contains exactly those).
void sgd_momentum_step(graph::ModelGraph& g, const std::map<std::string, nn::GradBundle>& grads,
                       VelocityMap& velocity, const TrainConfig& cfg);

// SGD training over the manifest. Uses the graph's native input size.
TrainHistory train_model(graph::ModelGraph& g, const data::DatasetManifest& train_set,
                         const data::NormStats& stats, const TrainConfig& cfg);

EvalReport evaluate(graph::ModelGraph& g, const data::DatasetManifest& test_set,
                    const data::NormStats& stats, std::size_t batch_size = 32);

struct Prediction {
    data::Label label = data::Label::normal;
    double probability = 0.0;
};

Prediction predict(graph::ModelGraph& g, const Tensor& image, const data::NormStats& stats);

// build -> replace_head(2) -> freeze -> train, returning the adapted graph.
struct TransferResult {
    graph::ModelGraph model;
    TrainHistory history;
    data::NormStats stats;
    double train_seconds = 0.0;
};

TransferResult run_transfer(zoo::ArchitectureId arch, const data::DatasetManifest& train_set,
                            const TrainConfig& cfg);

// Identical split and seeds for every architecture; rows sorted by subject
// accuracy descending.
ComparisonReport compare(const std::vector<zoo::ArchitectureId>& archs,
                         const data::DatasetManifest& dataset, const TrainConfig& cfg);

} // namespace mcinet::train

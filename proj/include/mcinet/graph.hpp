#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcinet/layers.hpp"
#include "mcinet/tensor.hpp"

namespace mcinet::graph {

enum class LayerKind {
    conv,
    fc,
    relu,
    maxpool,
    lrn,
    batchnorm,
    dropout,
    concat,
    residual_add,
    global_avg_pool,
    softmax_output,
};

std::string kind_name(LayerKind k);

struct Geometry {
    std::size_t kernel_h = 0, kernel_w = 0;
    std::size_t stride = 1, pad = 0;
    std::size_t units = 0;   // fc output width
    double drop_p = 0.5;     // dropout
};

// Predecessor id "input" refers to the graph input batch.
inline const std::string kInputId = "input";

struct LayerNode {
    std::string id;
    LayerKind kind = LayerKind::relu;
    Geometry geom;
    std::optional<nn::LayerParams> params;
    bool trainable = true;
    std::vector<std::string> inputs;
};

struct NodeCache {
    Tensor input; // primary input as seen by the node (post-flatten for fc)
    nn::ConvCache conv;
    nn::FcCache fc;
    nn::MaxPoolCache pool;
    nn::LrnCache lrn;
    nn::BatchNormCache bn;
    nn::DropoutCache drop;
    std::vector<std::size_t> in_shape;
    std::vector<std::size_t> concat_channels;
};

struct ActivationCache {
    std::unordered_map<std::string, NodeCache> nodes;
    std::unordered_map<std::string, std::vector<std::size_t>> output_shapes;
};

class ModelGraph {
public:
    ModelGraph() = default;
    ModelGraph(std::vector<std::size_t> input_shape, std::size_t class_count)
        : input_shape_(std::move(input_shape)), class_count_(class_count) {}

    void add_node(LayerNode node);
    bool has_node(const std::string& id) const { return index_.count(id) != 0; }
    LayerNode& node(const std::string& id);
    const LayerNode& node(const std::string& id) const;
    const std::vector<LayerNode>& nodes() const { return nodes_; }
    std::vector<LayerNode>& nodes() { return nodes_; }

    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    std::size_t class_count() const { return class_count_; }
    void set_class_count(std::size_t c) { class_count_ = c; }

    // Topological order over node indices; validates acyclicity and the
    // single-output-head invariant. Cached until the node set changes.
    const std::vector<std::size_t>& topo_order() const;
    const std::string& output_id() const;

private:
    std::vector<LayerNode> nodes_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::size_t> input_shape_; // C, H, W
    std::size_t class_count_ = 0;
    mutable std::vector<std::size_t> topo_;
    mutable std::string output_id_;
};

// Per-node output shapes (without the batch dimension), from input_shape
// through the DAG. Throws on any inconsistency, naming the node.
std::map<std::string, std::vector<std::size_t>> infer_shapes(const ModelGraph& g);

struct Census {
    std::map<std::string, std::size_t> kind_counts;
    std::size_t total_params = 0;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> node_shapes;
    std::size_t count(const std::string& kind) const {
        auto it = kind_counts.find(kind);
        return it == kind_counts.end() ? 0 : it->second;
    }
};

Census census(const ModelGraph& g);

// Topological execution. Returns the logits of the output head (softmax is
// applied downstream by loss/prediction code). `cache` is filled only when
// provided; train-mode dropout draws from `rng`.
Tensor forward(ModelGraph& g, const Tensor& batch, nn::Mode mode, std::mt19937_64* rng = nullptr,
               ActivationCache* cache = nullptr);

// Reverse-topological gradient accumulation. The returned map holds one
// GradBundle per trainable parameterized node, exactly. Frozen subgraphs with
// no trainable ancestors are skipped entirely.
std::map<std::string, nn::GradBundle> backward(ModelGraph& g, const ActivationCache& cache,
                                               const Tensor& d_logits);

// He-uniform weight init over [-sqrt(6/fan_in), sqrt(6/fan_in)].
Tensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng);

// Replaces the final fully-connected node with a freshly He-initialized one
// of `new_class_count` outputs. Everything else is untouched.
void replace_head(ModelGraph& g, std::size_t new_class_count, std::uint64_t seed);

// Sets trainable=false on `node_id` and all of its ancestors.
void freeze_through(ModelGraph& g, const std::string& node_id);

std::vector<std::string> trainable_param_node_ids(const ModelGraph& g);

// "NWTS" weight files: magic, u8 version=1, u32 tensor count, then per tensor
// u16 name length, UTF-8 name, u8 rank, rank x u32 LE extents, f64 LE values.
void save_weights(const ModelGraph& g, const std::string& path);
void load_weights(ModelGraph& g, const std::string& path);

// Graph summary (ids, kinds, shapes, trainable flags, parameter counts) as a
// JSON string.
std::string summary_json(const ModelGraph& g);

} // namespace mcinet::graph

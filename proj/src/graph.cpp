#include "mcinet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace mcinet::graph {

std::string kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::fc: return "fc";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::lrn: return "lrn";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::dropout: return "dropout";
        case LayerKind::concat: return "concat";
        case LayerKind::residual_add: return "residual-add";
        case LayerKind::global_avg_pool: return "global-avg-pool";
        case LayerKind::softmax_output: return "softmax-output";
    }
    return "?";
}

void ModelGraph::add_node(LayerNode node) {
    if (node.id.empty() || node.id == kInputId)
        throw std::invalid_argument("add_node: invalid node id '" + node.id + "'");
    if (index_.count(node.id)) throw std::invalid_argument("add_node: duplicate id '" + node.id + "'");
    for (const auto& in : node.inputs) {
        if (in != kInputId && !index_.count(in))
            throw std::invalid_argument("add_node: node '" + node.id + "' references unknown input '" +
                                        in + "'");
    }
    index_[node.id] = nodes_.size();
    nodes_.push_back(std::move(node));
    topo_.clear();
}

LayerNode& ModelGraph::node(const std::string& id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::invalid_argument("unknown node id '" + id + "'");
    return nodes_[it->second];
}

const LayerNode& ModelGraph::node(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::invalid_argument("unknown node id '" + id + "'");
    return nodes_[it->second];
}

const std::vector<std::size_t>& ModelGraph::topo_order() const {
    if (!topo_.empty() || nodes_.empty()) return topo_;
    // nodes are appended with all predecessors already present, so insertion
    // order is already topological; still verify and locate the single head
    std::vector<std::size_t> succ_count(nodes_.size(), 0);
    for (const auto& n : nodes_)
        for (const auto& in : n.inputs)
            if (in != kInputId) succ_count[index_.at(in)]++;
    std::vector<std::size_t> heads;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
        if (succ_count[i] == 0) heads.push_back(i);
    if (heads.size() != 1)
        throw std::runtime_error("graph must have exactly one output head, found " +
                                 std::to_string(heads.size()));
    output_id_ = nodes_[heads[0]].id;
    topo_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) topo_[i] = i;
    return topo_;
}

const std::string& ModelGraph::output_id() const {
    topo_order();
    return output_id_;
}

// ---- shape inference ----

static std::size_t flat_size(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

std::map<std::string, std::vector<std::size_t>> infer_shapes(const ModelGraph& g) {
    std::map<std::string, std::vector<std::size_t>> shapes;
    auto in_shape = [&](const LayerNode& n, std::size_t i) -> const std::vector<std::size_t>& {
        const std::string& id = n.inputs.at(i);
        if (id == kInputId) return g.input_shape();
        return shapes.at(id);
    };
    for (std::size_t idx : g.topo_order()) {
        const LayerNode& n = g.nodes()[idx];
        if (n.inputs.empty()) throw std::runtime_error("node '" + n.id + "' has no inputs");
        const auto& s0 = in_shape(n, 0);
        std::vector<std::size_t> out;
        switch (n.kind) {
            case LayerKind::conv: {
                if (s0.size() != 3)
                    throw std::runtime_error("node '" + n.id + "': conv needs CxHxW input, got " +
                                             shape_to_string(s0));
                const Tensor& w = n.params->weights;
                if (w.dim(1) != s0[0])
                    throw std::runtime_error("node '" + n.id + "': channel mismatch, input " +
                                             shape_to_string(s0) + " vs weights " + w.shape_str());
                out = {w.dim(0), conv_out_extent(s0[1], w.dim(2), n.geom.stride, n.geom.pad),
                       conv_out_extent(s0[2], w.dim(3), n.geom.stride, n.geom.pad)};
                break;
            }
            case LayerKind::fc: {
                const std::size_t din = flat_size(s0);
                const Tensor& w = n.params->weights;
                if (w.dim(1) != din)
                    throw std::runtime_error("node '" + n.id + "': fc expects " +
                                             std::to_string(w.dim(1)) + " inputs, got " +
                                             shape_to_string(s0));
                out = {w.dim(0)};
                break;
            }
            case LayerKind::maxpool:
                if (s0.size() != 3)
                    throw std::runtime_error("node '" + n.id + "': maxpool needs CxHxW input");
                out = {s0[0], conv_out_extent(s0[1], n.geom.kernel_h, n.geom.stride, n.geom.pad),
                       conv_out_extent(s0[2], n.geom.kernel_w, n.geom.stride, n.geom.pad)};
                break;
            case LayerKind::batchnorm:
                if (s0.size() != 3 || n.params->weights.numel() != s0[0])
                    throw std::runtime_error("node '" + n.id + "': batchnorm channel mismatch at " +
                                             shape_to_string(s0));
                out = s0;
                break;
            case LayerKind::concat: {
                std::size_t ctot = 0;
                for (std::size_t i = 0; i < n.inputs.size(); ++i) {
                    const auto& si = in_shape(n, i);
                    if (si.size() != 3 || si[1] != s0[1] || si[2] != s0[2])
                        throw std::runtime_error("node '" + n.id + "': concat inputs disagree, " +
                                                 shape_to_string(s0) + " vs " + shape_to_string(si));
                    ctot += si[0];
                }
                out = {ctot, s0[1], s0[2]};
                break;
            }
            case LayerKind::residual_add: {
                const auto& s1 = in_shape(n, 1);
                if (s0 != s1)
                    throw std::runtime_error("node '" + n.id + "': residual shapes differ, " +
                                             shape_to_string(s0) + " vs " + shape_to_string(s1));
                out = s0;
                break;
            }
            case LayerKind::global_avg_pool:
                if (s0.size() != 3)
                    throw std::runtime_error("node '" + n.id + "': global-avg-pool needs CxHxW input");
                out = {s0[0]};
                break;
            case LayerKind::relu:
            case LayerKind::lrn:
            case LayerKind::dropout:
            case LayerKind::softmax_output:
                out = s0;
                break;
        }
        shapes[n.id] = std::move(out);
    }
    const auto& terminal = shapes.at(g.output_id());
    if (flat_size(terminal) != g.class_count())
        throw std::runtime_error("terminal shape " + shape_to_string(terminal) +
                                 " does not match class count " + std::to_string(g.class_count()));
    return shapes;
}

// ---- census ----

static std::size_t param_count(const LayerNode& n) {
    if (!n.params) return 0;
    if (n.kind == LayerKind::batchnorm) return 2 * n.params->weights.numel();
    return n.params->weights.numel() + n.params->bias.size();
}

Census census(const ModelGraph& g) {
    Census c;
    const auto shapes = infer_shapes(g);
    for (std::size_t idx : g.topo_order()) {
        const LayerNode& n = g.nodes()[idx];
        c.kind_counts[kind_name(n.kind)]++;
        c.total_params += param_count(n);
        c.node_shapes.emplace_back(n.id, shapes.at(n.id));
    }
    return c;
}

// ---- execution ----

static Tensor flatten_batch(const Tensor& t) {
    if (t.rank() == 2) return t;
    std::size_t rest = 1;
    for (std::size_t i = 1; i < t.rank(); ++i) rest *= t.dim(i);
    return t.reshaped({t.dim(0), rest});
}

Tensor forward(ModelGraph& g, const Tensor& batch, nn::Mode mode, std::mt19937_64* rng,
               ActivationCache* cache) {
    {
        std::vector<std::size_t> expect = g.input_shape();
        expect.insert(expect.begin(), batch.dim(0));
        if (batch.shape() != expect)
            throw std::invalid_argument("forward: batch shape " + batch.shape_str() +
                                        " does not match input shape " + shape_to_string(expect));
    }
    std::mt19937_64 fallback_rng(0);
    if (!rng) rng = &fallback_rng;
    std::unordered_map<std::string, Tensor> outs;
    auto fetch = [&](const std::string& id) -> const Tensor& {
        return id == kInputId ? batch : outs.at(id);
    };
    for (std::size_t idx : g.topo_order()) {
        LayerNode& n = g.nodes()[idx];
        const Tensor& x = fetch(n.inputs[0]);
        NodeCache local;
        NodeCache* nc = cache ? &local : nullptr;
        Tensor y;
        switch (n.kind) {
            case LayerKind::conv:
                y = nn::conv2d(x, *n.params, n.geom.stride, n.geom.pad, nc ? &nc->conv : nullptr);
                break;
            case LayerKind::fc: {
                const Tensor xf = flatten_batch(x);
                if (nc) nc->in_shape = x.shape();
                y = nn::fully_connected(xf, *n.params, nc ? &nc->fc : nullptr);
                break;
            }
            case LayerKind::relu:
                if (nc) nc->input = x;
                y = nn::relu(x);
                break;
            case LayerKind::maxpool:
                y = nn::maxpool(x, n.geom.kernel_h, n.geom.kernel_w, n.geom.stride, n.geom.pad,
                                nc ? &nc->pool : nullptr);
                break;
            case LayerKind::lrn:
                y = nn::local_response_norm(x, nn::LrnConfig{}, nc ? &nc->lrn : nullptr);
                break;
            case LayerKind::batchnorm:
                y = nn::batch_norm(x, *n.params, mode, nc ? &nc->bn : nullptr);
                break;
            case LayerKind::dropout:
                y = nn::dropout(x, n.geom.drop_p, mode, *rng, nc ? &nc->drop : nullptr);
                break;
            case LayerKind::concat: {
                std::vector<const Tensor*> xs;
                for (const auto& in : n.inputs) xs.push_back(&fetch(in));
                if (nc)
                    for (const Tensor* t : xs) nc->concat_channels.push_back(t->dim(1));
                y = nn::concat_channels(xs);
                break;
            }
            case LayerKind::residual_add:
                y = nn::residual_add(x, fetch(n.inputs[1]));
                break;
            case LayerKind::global_avg_pool:
                if (nc) nc->in_shape = x.shape();
                y = nn::global_avg_pool(x);
                break;
            case LayerKind::softmax_output:
                y = flatten_batch(x); // logits pass through; softmax applied by loss/predict
                break;
        }
        if (cache) {
            cache->nodes[n.id] = std::move(local);
            cache->output_shapes[n.id] = y.shape();
        }
        outs[n.id] = std::move(y);
    }
    return outs.at(g.output_id());
}

// needs-gradient flag per node: true when the node or anything upstream of it
// holds trainable parameters
static std::vector<bool> grad_needed(const ModelGraph& g) {
    std::vector<bool> need(g.nodes().size(), false);
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < g.nodes().size(); ++i) index[g.nodes()[i].id] = i;
    for (std::size_t idx : g.topo_order()) {
        const LayerNode& n = g.nodes()[idx];
        bool v = n.params && n.trainable;
        for (const auto& in : n.inputs)
            if (in != kInputId && need[index.at(in)]) v = true;
        need[idx] = v;
    }
    return need;
}

std::map<std::string, nn::GradBundle> backward(ModelGraph& g, const ActivationCache& cache,
                                               const Tensor& d_logits) {
    std::map<std::string, nn::GradBundle> grads;
    std::unordered_map<std::string, Tensor> d_out;
    const auto need = grad_needed(g);
    const auto& topo = g.topo_order();
    d_out[g.output_id()] = d_logits;

    auto accumulate = [&](const std::string& id, Tensor d) {
        if (id == kInputId) return;
        auto it = d_out.find(id);
        if (it == d_out.end()) {
            d_out.emplace(id, std::move(d));
        } else {
            Tensor& acc = it->second;
            // fan-in between 4-d and flattened consumers
            if (!acc.same_shape(d)) d = d.reshaped(acc.shape());
            for (std::size_t i = 0; i < acc.numel(); ++i) acc[i] += d[i];
        }
    };

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        LayerNode& n = g.nodes()[*it];
        if (!need[*it]) continue;
        auto dit = d_out.find(n.id);
        if (dit == d_out.end()) continue;
        const Tensor& dy = dit->second;
        const NodeCache& nc = cache.nodes.at(n.id);
        switch (n.kind) {
            case LayerKind::conv: {
                nn::GradBundle gb = nn::conv2d_backward(nc.conv, *n.params, dy);
                accumulate(n.inputs[0], std::move(gb.d_input));
                gb.d_input = Tensor();
                if (n.trainable) grads[n.id] = std::move(gb);
                break;
            }
            case LayerKind::fc: {
                Tensor dyf = dy.rank() == 2 ? dy : flatten_batch(dy);
                nn::GradBundle gb = nn::fully_connected_backward(nc.fc, *n.params, dyf);
                accumulate(n.inputs[0], gb.d_input.reshaped(nc.in_shape));
                gb.d_input = Tensor();
                if (n.trainable) grads[n.id] = std::move(gb);
                break;
            }
            case LayerKind::relu:
                accumulate(n.inputs[0], nn::relu_backward(nc.input, dy));
                break;
            case LayerKind::maxpool:
                accumulate(n.inputs[0], nn::maxpool_backward(nc.pool, dy));
                break;
            case LayerKind::lrn:
                accumulate(n.inputs[0], nn::local_response_norm_backward(nc.lrn, nn::LrnConfig{}, dy));
                break;
            case LayerKind::batchnorm: {
                nn::GradBundle gb = nn::batch_norm_backward(nc.bn, *n.params, dy);
                accumulate(n.inputs[0], std::move(gb.d_input));
                gb.d_input = Tensor();
                if (n.trainable) grads[n.id] = std::move(gb);
                break;
            }
            case LayerKind::dropout:
                accumulate(n.inputs[0], nn::dropout_backward(nc.drop, dy));
                break;
            case LayerKind::concat: {
                auto parts = nn::split_channels(dy, nc.concat_channels);
                for (std::size_t i = 0; i < parts.size(); ++i)
                    accumulate(n.inputs[i], std::move(parts[i]));
                break;
            }
            case LayerKind::residual_add:
                accumulate(n.inputs[0], dy);
                accumulate(n.inputs[1], dy);
                break;
            case LayerKind::global_avg_pool:
                accumulate(n.inputs[0], nn::global_avg_pool_backward(nc.in_shape, dy));
                break;
            case LayerKind::softmax_output:
                accumulate(n.inputs[0], dy);
                break;
        }
    }
    return grads;
}

// ---- surgery ----

Tensor he_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = u(rng);
    return t;
}

static LayerNode* final_fc(ModelGraph& g) {
    LayerNode* last = nullptr;
    for (std::size_t idx : g.topo_order()) {
        LayerNode& n = g.nodes()[idx];
        if (n.kind == LayerKind::fc) last = &n;
    }
    if (!last) throw std::runtime_error("replace_head: graph has no fully-connected node");
    return last;
}

void replace_head(ModelGraph& g, std::size_t new_class_count, std::uint64_t seed) {
    if (new_class_count < 2) throw std::invalid_argument("replace_head: class count must be >= 2");
    LayerNode* head = final_fc(g);
    const std::size_t din = head->params->weights.dim(1);
    std::mt19937_64 rng(seed);
    head->params->weights = he_uniform({new_class_count, din}, din, rng);
    head->params->bias.assign(new_class_count, 0.0);
    head->geom.units = new_class_count;
    head->trainable = true;
    g.set_class_count(new_class_count);
}

void freeze_through(ModelGraph& g, const std::string& node_id) {
    g.node(node_id); // validates the id
    std::set<std::string> frozen{node_id};
    // walk ancestors; topo order guarantees predecessors come earlier
    const auto& topo = g.topo_order();
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        LayerNode& n = g.nodes()[*it];
        if (!frozen.count(n.id)) continue;
        n.trainable = false;
        for (const auto& in : n.inputs)
            if (in != kInputId) frozen.insert(in);
    }
}

std::vector<std::string> trainable_param_node_ids(const ModelGraph& g) {
    std::vector<std::string> ids;
    for (std::size_t idx : g.topo_order()) {
        const LayerNode& n = g.nodes()[idx];
        if (n.params && n.trainable) ids.push_back(n.id);
    }
    return ids;
}

// ---- NWTS weight files ----

namespace {

void put_u16(std::ostream& os, std::uint16_t v) {
    os.put(static_cast<char>(v & 0xff));
    os.put(static_cast<char>(v >> 8));
}

void put_u32(std::ostream& os, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((u >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

void write_tensor(std::ostream& os, const std::string& name, const std::vector<std::size_t>& shape,
                  const std::vector<double>& values) {
    put_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(shape.size()));
    for (auto e : shape) put_u32(os, static_cast<std::uint32_t>(e));
    for (double v : values) put_f64(os, v);
}

// name -> (shape, values)
using TensorMap = std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>>;

std::vector<std::pair<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>>>
node_tensors(const LayerNode& n) {
    std::vector<std::pair<std::string, std::pair<std::vector<std::size_t>, std::vector<double>>>> out;
    if (!n.params) return out;
    const auto& p = *n.params;
    out.emplace_back(n.id + "/w", std::make_pair(p.weights.shape(), p.weights.values()));
    out.emplace_back(n.id + "/b", std::make_pair(std::vector<std::size_t>{p.bias.size()}, p.bias));
    if (!p.running_mean.empty()) {
        out.emplace_back(n.id + "/rm",
                         std::make_pair(std::vector<std::size_t>{p.running_mean.size()}, p.running_mean));
        out.emplace_back(n.id + "/rv",
                         std::make_pair(std::vector<std::size_t>{p.running_var.size()}, p.running_var));
    }
    return out;
}

} // namespace

void save_weights(const ModelGraph& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_weights: cannot open " + path);
    std::uint32_t count = 0;
    for (const auto& n : g.nodes()) count += static_cast<std::uint32_t>(node_tensors(n).size());
    os.write("NWTS", 4);
    os.put(1);
    put_u32(os, count);
    for (std::size_t idx : g.topo_order())
        for (const auto& [name, sv] : node_tensors(g.nodes()[idx]))
            write_tensor(os, name, sv.first, sv.second);
    if (!os) throw std::runtime_error("save_weights: write failed for " + path);
}

void load_weights(ModelGraph& g, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_weights: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "NWTS", 4) != 0)
        throw std::runtime_error("load_weights: bad magic in " + path);
    if (is.get() != 1) throw std::runtime_error("load_weights: unsupported version in " + path);
    const std::uint32_t count = get_u32(is);
    TensorMap tensors;
    for (std::uint32_t t = 0; t < count; ++t) {
        const std::uint16_t len = get_u16(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const int rank = is.get();
        std::vector<std::size_t> shape(static_cast<std::size_t>(rank));
        for (auto& e : shape) e = get_u32(is);
        std::size_t n = 1;
        for (auto e : shape) n *= e;
        std::vector<double> values(n);
        for (auto& v : values) v = get_f64(is);
        if (!is) throw std::runtime_error("load_weights: truncated file " + path);
        tensors[name] = {std::move(shape), std::move(values)};
    }
    for (auto& n : g.nodes()) {
        for (auto& [name, expect] : node_tensors(n)) {
            auto it = tensors.find(name);
            if (it == tensors.end())
                throw std::runtime_error("load_weights: missing tensor '" + name + "' for node '" +
                                         n.id + "'");
            if (it->second.first != expect.first)
                throw std::runtime_error("load_weights: shape mismatch for node '" + n.id + "': file " +
                                         shape_to_string(it->second.first) + " vs graph " +
                                         shape_to_string(expect.first));
        }
        if (!n.params) continue;
        auto& p = *n.params;
        p.weights = Tensor(p.weights.shape(), tensors.at(n.id + "/w").second);
        p.bias = tensors.at(n.id + "/b").second;
        if (!p.running_mean.empty()) {
            p.running_mean = tensors.at(n.id + "/rm").second;
            p.running_var = tensors.at(n.id + "/rv").second;
        }
    }
}

std::string summary_json(const ModelGraph& g) {
    nlohmann::ordered_json j;
    const auto shapes = infer_shapes(g);
    j["input_shape"] = g.input_shape();
    j["class_count"] = g.class_count();
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (std::size_t idx : g.topo_order()) {
        const LayerNode& n = g.nodes()[idx];
        nlohmann::ordered_json jn;
        jn["id"] = n.id;
        jn["kind"] = kind_name(n.kind);
        jn["inputs"] = n.inputs;
        jn["output_shape"] = shapes.at(n.id);
        jn["trainable"] = n.trainable;
        jn["params"] = param_count(n);
        nodes.push_back(std::move(jn));
    }
    j["nodes"] = std::move(nodes);
    const Census c = census(g);
    j["kind_counts"] = c.kind_counts;
    j["total_params"] = c.total_params;
    return j.dump(2);
}

} // namespace mcinet::graph

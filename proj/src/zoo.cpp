#include "mcinet/zoo.hpp"

#include <stdexcept>

namespace mcinet::zoo {

using graph::Geometry;
using graph::LayerKind;
using graph::LayerNode;
using graph::ModelGraph;

std::string arch_name(ArchitectureId a) {
    switch (a) {
        case ArchitectureId::alexnet: return "alexnet";
        case ArchitectureId::vgg16: return "vgg16";
        case ArchitectureId::googlenet: return "googlenet";
        case ArchitectureId::resnet18: return "resnet18";
    }
    return "?";
}

ArchitectureId arch_from_name(const std::string& name) {
    if (name == "alexnet") return ArchitectureId::alexnet;
    if (name == "vgg16") return ArchitectureId::vgg16;
    if (name == "googlenet") return ArchitectureId::googlenet;
    if (name == "resnet18") return ArchitectureId::resnet18;
    throw std::invalid_argument("unknown architecture '" + name +
                                "' (expected alexnet|vgg16|googlenet|resnet18)");
}

namespace {

// Tracks the running channel count so conv/fc nodes can size their weights.
struct Builder {
    ModelGraph g;
    std::mt19937_64 rng;
    std::string tail = graph::kInputId;
    std::size_t channels = 0;

    Builder(std::vector<std::size_t> input_shape, std::size_t class_count, std::uint64_t seed)
        : g(input_shape, class_count), rng(seed), channels(input_shape[0]) {}

    std::string conv(const std::string& id, std::size_t cout, std::size_t k, std::size_t stride,
                     std::size_t pad, const std::string& from = "", std::size_t cin_override = 0) {
        const std::string src = from.empty() ? tail : from;
        const std::size_t cin = cin_override ? cin_override : channels;
        LayerNode n;
        n.id = id;
        n.kind = LayerKind::conv;
        n.geom.kernel_h = n.geom.kernel_w = k;
        n.geom.stride = stride;
        n.geom.pad = pad;
        nn::LayerParams p;
        p.weights = graph::he_uniform({cout, cin, k, k}, cin * k * k, rng);
        p.bias.assign(cout, 0.0);
        n.params = std::move(p);
        n.inputs = {src};
        g.add_node(std::move(n));
        tail = id;
        channels = cout;
        return id;
    }

    std::string fc(const std::string& id, std::size_t din, std::size_t dout) {
        LayerNode n;
        n.id = id;
        n.kind = LayerKind::fc;
        n.geom.units = dout;
        nn::LayerParams p;
        p.weights = graph::he_uniform({dout, din}, din, rng);
        p.bias.assign(dout, 0.0);
        n.params = std::move(p);
        n.inputs = {tail};
        g.add_node(std::move(n));
        tail = id;
        return id;
    }

    std::string simple(const std::string& id, LayerKind kind, const std::string& from = "") {
        LayerNode n;
        n.id = id;
        n.kind = kind;
        n.inputs = {from.empty() ? tail : from};
        g.add_node(std::move(n));
        tail = id;
        return id;
    }

    std::string relu(const std::string& id, const std::string& from = "") {
        return simple(id, LayerKind::relu, from);
    }

    std::string pool(const std::string& id, std::size_t k, std::size_t stride, std::size_t pad = 0,
                     const std::string& from = "") {
        LayerNode n;
        n.id = id;
        n.kind = LayerKind::maxpool;
        n.geom.kernel_h = n.geom.kernel_w = k;
        n.geom.stride = stride;
        n.geom.pad = pad;
        n.inputs = {from.empty() ? tail : from};
        g.add_node(std::move(n));
        tail = id;
        return id;
    }

    std::string batchnorm(const std::string& id, const std::string& from = "") {
        LayerNode n;
        n.id = id;
        n.kind = LayerKind::batchnorm;
        nn::LayerParams p;
        p.weights = Tensor::full({channels}, 1.0);
        p.bias.assign(channels, 0.0);
        p.running_mean.assign(channels, 0.0);
        p.running_var.assign(channels, 1.0);
        n.params = std::move(p);
        n.inputs = {from.empty() ? tail : from};
        g.add_node(std::move(n));
        tail = id;
        return id;
    }

    std::string dropout(const std::string& id, double p) {
        LayerNode n;
        n.id = id;
        n.kind = LayerKind::dropout;
        n.geom.drop_p = p;
        n.inputs = {tail};
        g.add_node(std::move(n));
        tail = id;
        return id;
    }

    std::string concat(const std::string& id, const std::vector<std::string>& from,
                       std::size_t out_channels) {
        LayerNode n;
        n.id = id;
        n.kind = LayerKind::concat;
        n.inputs = from;
        g.add_node(std::move(n));
        tail = id;
        channels = out_channels;
        return id;
    }

    std::string add(const std::string& id, const std::string& a, const std::string& b) {
        LayerNode n;
        n.id = id;
        n.kind = LayerKind::residual_add;
        n.inputs = {a, b};
        g.add_node(std::move(n));
        tail = id;
        return id;
    }

    ModelGraph finish() {
        simple("output", LayerKind::softmax_output);
        graph::infer_shapes(g); // builder contract: shapes must check out
        return std::move(g);
    }
};

void alexnet_body(Builder& b, std::size_t c1, std::size_t c2, std::size_t c3, std::size_t c45,
                  std::size_t fc_width, std::size_t conv1_stride, std::size_t fc_in,
                  std::size_t class_count) {
    b.conv("conv1", c1, 11, conv1_stride, 0);
    b.relu("relu1");
    b.simple("lrn1", LayerKind::lrn);
    b.pool("pool1", 3, 2);
    b.conv("conv2", c2, 5, 1, 2);
    b.relu("relu2");
    b.simple("lrn2", LayerKind::lrn);
    b.pool("pool2", 3, 2);
    b.conv("conv3", c3, 3, 1, 1);
    b.relu("relu3");
    b.conv("conv4", c3, 3, 1, 1);
    b.relu("relu4");
    b.conv("conv5", c45, 3, 1, 1);
    b.relu("relu5");
    b.pool("pool5", 3, 2);
    b.fc("fc6", fc_in, fc_width);
    b.relu("relu6");
    b.dropout("drop6", 0.5);
    b.fc("fc7", fc_width, fc_width);
    b.relu("relu7");
    b.dropout("drop7", 0.5);
    b.fc("fc8", fc_width, class_count);
}

} // namespace

graph::ModelGraph build_alexnet(std::size_t class_count, std::uint64_t seed) {
    if (class_count < 2) throw std::invalid_argument("build_alexnet: class count must be >= 2");
    Builder b({3, 227, 227}, class_count, seed);
    alexnet_body(b, 96, 256, 384, 256, 4096, 4, 256 * 6 * 6, class_count);
    return b.finish();
}

graph::ModelGraph build_alexnet_small(std::size_t class_count, std::uint64_t seed) {
    if (class_count < 2) throw std::invalid_argument("build_alexnet_small: class count must be >= 2");
    Builder b({3, 64, 64}, class_count, seed);
    alexnet_body(b, 32, 64, 96, 64, 256, 2, 64 * 2 * 2, class_count);
    return b.finish();
}

graph::ModelGraph build_vgg16(std::size_t class_count, std::uint64_t seed) {
    if (class_count < 2) throw std::invalid_argument("build_vgg16: class count must be >= 2");
    Builder b({3, 224, 224}, class_count, seed);
    const std::size_t block_sizes[] = {2, 2, 3, 3, 3};
    const std::size_t block_channels[] = {64, 128, 256, 512, 512};
    int conv_idx = 1;
    for (int blk = 0; blk < 5; ++blk) {
        for (std::size_t i = 0; i < block_sizes[blk]; ++i) {
            const std::string id = "conv" + std::to_string(conv_idx);
            b.conv(id, block_channels[blk], 3, 1, 1);
            b.relu("relu" + std::to_string(conv_idx));
            ++conv_idx;
        }
        b.pool("pool" + std::to_string(blk + 1), 2, 2);
    }
    b.fc("fc14", 512 * 7 * 7, 4096);
    b.relu("relu14");
    b.dropout("drop14", 0.5);
    b.fc("fc15", 4096, 4096);
    b.relu("relu15");
    b.dropout("drop15", 0.5);
    b.fc("fc16", 4096, class_count);
    return b.finish();
}

namespace {

// Four parallel branches: 1x1 / 1x1->3x3 / 1x1->5x5 / pool->1x1, channel concat.
std::string inception(Builder& b, const std::string& name, std::size_t cin, std::size_t c1,
                      std::size_t c3r, std::size_t c3, std::size_t c5r, std::size_t c5,
                      std::size_t cp) {
    const std::string in = b.tail;
    b.conv(name + "_b1", c1, 1, 1, 0, in, cin);
    const std::string b1 = b.relu(name + "_b1r");
    b.conv(name + "_b2a", c3r, 1, 1, 0, in, cin);
    b.relu(name + "_b2ar");
    b.conv(name + "_b2b", c3, 3, 1, 1);
    const std::string b2 = b.relu(name + "_b2r");
    b.conv(name + "_b3a", c5r, 1, 1, 0, in, cin);
    b.relu(name + "_b3ar");
    b.conv(name + "_b3b", c5, 5, 1, 2);
    const std::string b3 = b.relu(name + "_b3r");
    b.pool(name + "_b4p", 3, 1, 1, in);
    b.conv(name + "_b4", cp, 1, 1, 0, "", cin);
    const std::string b4 = b.relu(name + "_b4r");
    return b.concat(name, {b1, b2, b3, b4}, c1 + c3 + c5 + cp);
}

} // namespace

graph::ModelGraph build_googlenet(std::size_t class_count, std::uint64_t seed) {
    if (class_count < 2) throw std::invalid_argument("build_googlenet: class count must be >= 2");
    Builder b({3, 224, 224}, class_count, seed);
    b.conv("conv1", 64, 7, 2, 3);
    b.relu("relu1");
    b.pool("pool1", 3, 2, 1);
    b.conv("conv2", 64, 1, 1, 0);
    b.relu("relu2");
    b.conv("conv3", 192, 3, 1, 1);
    b.relu("relu3");
    b.pool("pool2", 3, 2, 1);
    inception(b, "inc3a", 192, 64, 96, 128, 16, 32, 32);
    inception(b, "inc3b", 256, 128, 128, 192, 32, 96, 64);
    b.pool("pool3", 3, 2, 1);
    inception(b, "inc4a", 480, 192, 96, 208, 16, 48, 64);
    inception(b, "inc4b", 512, 160, 112, 224, 24, 64, 64);
    inception(b, "inc4c", 512, 128, 128, 256, 24, 64, 64);
    inception(b, "inc4d", 512, 112, 144, 288, 32, 64, 64);
    inception(b, "inc4e", 528, 256, 160, 320, 32, 128, 128);
    b.pool("pool4", 3, 2, 1);
    inception(b, "inc5a", 832, 256, 160, 320, 32, 128, 128);
    inception(b, "inc5b", 832, 384, 192, 384, 48, 128, 128);
    b.simple("gap", LayerKind::global_avg_pool);
    b.dropout("drop", 0.4);
    b.fc("fc", 1024, class_count);
    return b.finish();
}

namespace {

std::string basic_block(Builder& b, const std::string& name, std::size_t cin, std::size_t cout,
                        std::size_t stride) {
    const std::string in = b.tail;
    b.conv(name + "_conv1", cout, 3, stride, 1, in, cin);
    b.batchnorm(name + "_bn1");
    b.relu(name + "_relu1");
    b.conv(name + "_conv2", cout, 3, 1, 1);
    const std::string main = b.batchnorm(name + "_bn2");
    std::string shortcut = in;
    if (stride != 1 || cin != cout) {
        b.conv(name + "_proj", cout, 1, stride, 0, in, cin);
        shortcut = b.batchnorm(name + "_projbn");
    }
    b.add(name + "_add", main, shortcut);
    return b.relu(name + "_relu2");
}

} // namespace

graph::ModelGraph build_resnet18(std::size_t class_count, std::uint64_t seed) {
    if (class_count < 2) throw std::invalid_argument("build_resnet18: class count must be >= 2");
    Builder b({3, 224, 224}, class_count, seed);
    b.conv("conv1", 64, 7, 2, 3);
    b.batchnorm("bn1");
    b.relu("relu1");
    b.pool("pool1", 3, 2, 1);
    std::size_t cin = 64;
    const std::size_t stage_channels[] = {64, 128, 256, 512};
    for (int s = 0; s < 4; ++s) {
        const std::size_t cout = stage_channels[s];
        const std::size_t entry_stride = s == 0 ? 1 : 2;
        basic_block(b, "s" + std::to_string(s + 1) + "b1", cin, cout, entry_stride);
        basic_block(b, "s" + std::to_string(s + 1) + "b2", cout, cout, 1);
        cin = cout;
    }
    b.simple("gap", LayerKind::global_avg_pool);
    b.fc("fc", 512, class_count);
    return b.finish();
}

graph::ModelGraph build(ArchitectureId a, std::size_t class_count, std::uint64_t seed) {
    switch (a) {
        case ArchitectureId::alexnet: return build_alexnet(class_count, seed);
        case ArchitectureId::vgg16: return build_vgg16(class_count, seed);
        case ArchitectureId::googlenet: return build_googlenet(class_count, seed);
        case ArchitectureId::resnet18: return build_resnet18(class_count, seed);
    }
    throw std::invalid_argument("build: bad architecture id");
}

std::string last_conv_id(const graph::ModelGraph& g) {
    std::string last;
    for (std::size_t idx : g.topo_order()) {
        const auto& n = g.nodes()[idx];
        if (n.kind == graph::LayerKind::conv) last = n.id;
    }
    if (last.empty()) throw std::runtime_error("last_conv_id: graph has no convolution node");
    return last;
}

} // namespace mcinet::zoo

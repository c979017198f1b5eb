#include "mcinet/gradcheck.hpp"

#include <cmath>
#include <random>

#include "mcinet/layers.hpp"

namespace mcinet::nn {

double grad_check(const std::function<Tensor()>& forward,
                  const std::function<std::vector<Tensor>(const Tensor&)>& backward,
                  const std::vector<Tensor*>& inputs, double eps, std::uint64_t proj_seed) {
    Tensor y0 = forward();
    std::mt19937_64 rng(proj_seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor proj(y0.shape());
    for (auto& v : proj.values()) v = u(rng);

    const auto loss = [&]() {
        const Tensor y = forward();
        double s = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * proj[i];
        return s;
    };

    const std::vector<Tensor> analytic = backward(proj);
    double max_err = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t) {
        Tensor& x = *inputs[t];
        for (std::size_t i = 0; i < x.numel(); ++i) {
            const double orig = x[i];
            x[i] = orig + eps;
            const double lp = loss();
            x[i] = orig - eps;
            const double lm = loss();
            x[i] = orig;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double a = analytic[t][i];
            const double err = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

namespace {

// Uniform values with |v| > margin, for layers with a kink at zero.
Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double margin = 0.0) {
    Tensor t(std::move(shape));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : t.values()) {
        do {
            v = u(rng);
        } while (std::fabs(v) <= margin);
    }
    return t;
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& e : v) e = u(rng);
    return v;
}

double check_conv(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d_cin(1, 3), d_cout(1, 4), d_hw(4, 9), d_k(1, 3),
        d_s(1, 2), d_p(0, 1);
    const std::size_t cin = d_cin(rng), cout = d_cout(rng), k = d_k(rng);
    const std::size_t h = std::max(d_hw(rng), k), w = std::max(d_hw(rng), k);
    const std::size_t stride = d_s(rng), pad = d_p(rng);
    Tensor x = random_tensor({2, cin, h, w}, rng);
    LayerParams p;
    p.weights = random_tensor({cout, cin, k, k}, rng);
    p.bias = random_vec(cout, rng);
    Tensor bias_t({cout}, p.bias);
    ConvCache cache;
    auto fwd = [&]() {
        p.bias = bias_t.values();
        return conv2d(x, p, stride, pad, &cache);
    };
    auto bwd = [&](const Tensor& d_out) {
        fwd();
        GradBundle g = conv2d_backward(cache, p, d_out);
        return std::vector<Tensor>{g.d_input, g.d_weights, Tensor({cout}, g.d_bias)};
    };
    return grad_check(fwd, bwd, {&x, &p.weights, &bias_t}, 1e-5, rng());
}

double check_fc(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d_n(1, 3), d_d(1, 8);
    const std::size_t n = d_n(rng), din = d_d(rng), dout = d_d(rng);
    Tensor x = random_tensor({n, din}, rng);
    LayerParams p;
    p.weights = random_tensor({dout, din}, rng);
    p.bias = random_vec(dout, rng);
    Tensor bias_t({dout}, p.bias);
    FcCache cache;
    auto fwd = [&]() {
        p.bias = bias_t.values();
        return fully_connected(x, p, &cache);
    };
    auto bwd = [&](const Tensor& d_out) {
        fwd();
        GradBundle g = fully_connected_backward(cache, p, d_out);
        return std::vector<Tensor>{g.d_input, g.d_weights, Tensor({dout}, g.d_bias)};
    };
    return grad_check(fwd, bwd, {&x, &p.weights, &bias_t}, 1e-5, rng());
}

double check_relu(std::mt19937_64& rng) {
    Tensor x = random_tensor({2, 3, 5, 5}, rng, 1e-3);
    auto fwd = [&]() { return relu(x); };
    auto bwd = [&](const Tensor& d_out) { return std::vector<Tensor>{relu_backward(x, d_out)}; };
    return grad_check(fwd, bwd, {&x}, 1e-5, rng());
}

double check_maxpool(std::mt19937_64& rng) {
    // distinct ramp keeps every window maximum unique by a safe margin
    Tensor x({1, 2, 6, 6});
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (std::size_t i = 0; i < x.numel(); ++i) x[i] = u(rng) + static_cast<double>(i % 9);
    MaxPoolCache cache;
    auto fwd = [&]() { return maxpool(x, 2, 2, 2, 0, &cache); };
    auto bwd = [&](const Tensor& d_out) {
        fwd();
        return std::vector<Tensor>{maxpool_backward(cache, d_out)};
    };
    return grad_check(fwd, bwd, {&x}, 1e-5, rng());
}

double check_lrn(std::mt19937_64& rng) {
    Tensor x = random_tensor({2, 4, 4, 4}, rng);
    LrnConfig cfg;
    LrnCache cache;
    auto fwd = [&]() { return local_response_norm(x, cfg, &cache); };
    auto bwd = [&](const Tensor& d_out) {
        fwd();
        return std::vector<Tensor>{local_response_norm_backward(cache, cfg, d_out)};
    };
    return grad_check(fwd, bwd, {&x}, 1e-5, rng());
}

double check_batch_norm(std::mt19937_64& rng) {
    Tensor x = random_tensor({3, 2, 4, 4}, rng);
    LayerParams p;
    p.weights = random_tensor({2}, rng);
    p.bias = random_vec(2, rng);
    p.running_mean.assign(2, 0.0);
    p.running_var.assign(2, 1.0);
    Tensor bias_t({2}, p.bias);
    BatchNormCache cache;
    auto fwd = [&]() {
        p.bias = bias_t.values();
        return batch_norm(x, p, Mode::train, &cache);
    };
    auto bwd = [&](const Tensor& d_out) {
        fwd();
        GradBundle g = batch_norm_backward(cache, p, d_out);
        return std::vector<Tensor>{g.d_input, g.d_weights, Tensor({2}, g.d_bias)};
    };
    return grad_check(fwd, bwd, {&x, &p.weights, &bias_t}, 1e-5, rng());
}

double check_softmax_xent(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> d_lab(0, 3);
    Tensor logits = random_tensor({3, 4}, rng);
    std::vector<std::size_t> labels(3);
    for (auto& l : labels) l = d_lab(rng);
    SoftmaxResult res;
    auto fwd = [&]() {
        res = softmax_cross_entropy(logits, labels);
        return Tensor({1}, {res.loss});
    };
    auto bwd = [&](const Tensor& d_out) {
        fwd();
        Tensor d = softmax_cross_entropy_backward(res, labels);
        for (auto& v : d.values()) v *= d_out[0];
        return std::vector<Tensor>{d};
    };
    return grad_check(fwd, bwd, {&logits}, 1e-5, rng());
}

double check_gap(std::mt19937_64& rng) {
    Tensor x = random_tensor({2, 3, 4, 5}, rng);
    auto fwd = [&]() { return global_avg_pool(x); };
    auto bwd = [&](const Tensor& d_out) {
        return std::vector<Tensor>{global_avg_pool_backward(x.shape(), d_out)};
    };
    return grad_check(fwd, bwd, {&x}, 1e-5, rng());
}

double check_residual(std::mt19937_64& rng) {
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    Tensor s = random_tensor({2, 3, 4, 4}, rng);
    auto fwd = [&]() { return residual_add(x, s); };
    auto bwd = [&](const Tensor& d_out) { return std::vector<Tensor>{d_out, d_out}; };
    return grad_check(fwd, bwd, {&x, &s}, 1e-5, rng());
}

double check_concat(std::mt19937_64& rng) {
    Tensor a = random_tensor({2, 2, 3, 3}, rng);
    Tensor b = random_tensor({2, 3, 3, 3}, rng);
    auto fwd = [&]() { return concat_channels({&a, &b}); };
    auto bwd = [&](const Tensor& d_out) {
        auto parts = split_channels(d_out, {2, 3});
        return std::vector<Tensor>{parts[0], parts[1]};
    };
    return grad_check(fwd, bwd, {&a, &b}, 1e-5, rng());
}

double check_dropout(std::mt19937_64& rng) {
    // fixed mask seed makes the op linear and repeatable across FD evals
    Tensor x = random_tensor({2, 3, 4, 4}, rng);
    const std::uint64_t mask_seed = rng();
    DropoutCache cache;
    auto fwd = [&]() {
        std::mt19937_64 mask_rng(mask_seed);
        return dropout(x, 0.5, Mode::train, mask_rng, &cache);
    };
    auto bwd = [&](const Tensor& d_out) {
        fwd();
        return std::vector<Tensor>{dropout_backward(cache, d_out)};
    };
    return grad_check(fwd, bwd, {&x}, 1e-5, rng());
}

} // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::size_t instances_per_layer, std::uint64_t seed) {
    struct Case {
        const char* name;
        double (*fn)(std::mt19937_64&);
    };
    const Case cases[] = {
        {"conv2d", check_conv},         {"fully_connected", check_fc},
        {"relu", check_relu},           {"maxpool", check_maxpool},
        {"lrn", check_lrn},             {"batch_norm", check_batch_norm},
        {"softmax_xent", check_softmax_xent}, {"global_avg_pool", check_gap},
        {"residual_add", check_residual},     {"concat", check_concat},
        {"dropout", check_dropout},
    };
    std::vector<GradSuiteEntry> out;
    for (const auto& c : cases) {
        std::mt19937_64 rng(seed);
        GradSuiteEntry e{c.name, 0.0, instances_per_layer};
        for (std::size_t i = 0; i < instances_per_layer; ++i)
            e.max_rel_err = std::max(e.max_rel_err, c.fn(rng));
        out.push_back(e);
    }
    return out;
}

} // namespace mcinet::nn

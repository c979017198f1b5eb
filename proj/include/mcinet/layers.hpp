#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mcinet/tensor.hpp"

namespace mcinet::nn {

// Learned state of a parameterized layer. `running_mean`/`running_var` are
// only present for batch normalization.
struct LayerParams {
    Tensor weights;
    std::vector<double> bias;
    std::vector<double> running_mean;
    std::vector<double> running_var;
};

struct GradBundle {
    Tensor d_input;
    Tensor d_weights;
    std::vector<double> d_bias;
};

// ---- convolution (cross-correlation, no kernel flip) ----

struct ConvCache {
    Tensor input;
    std::size_t stride = 1, pad = 0;
};

// x: N x Cin x H x W, weights: Cout x Cin x kh x kw, bias: Cout.
Tensor conv2d(const Tensor& x, const LayerParams& p, std::size_t stride, std::size_t pad,
              ConvCache* cache = nullptr);
GradBundle conv2d_backward(const ConvCache& cache, const LayerParams& p, const Tensor& d_out);

// Reference direct convolution, quadruple loop. Test oracle and fallback path.
Tensor conv2d_naive(const Tensor& x, const LayerParams& p, std::size_t stride, std::size_t pad);

// ---- max pooling ----

struct MaxPoolCache {
    std::vector<std::size_t> winners; // flat input index per output element
    std::vector<std::size_t> in_shape;
};

Tensor maxpool(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
               MaxPoolCache* cache = nullptr);
Tensor maxpool_backward(const MaxPoolCache& cache, const Tensor& d_out);

// ---- relu ----

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& d_out);

// ---- fully connected: y = x * W^T + b ----

struct FcCache {
    Tensor input; // N x Din
};

// x: N x Din, weights: Dout x Din, bias: Dout.
Tensor fully_connected(const Tensor& x, const LayerParams& p, FcCache* cache = nullptr);
GradBundle fully_connected_backward(const FcCache& cache, const LayerParams& p, const Tensor& d_out);

// ---- softmax cross entropy ----

struct SoftmaxResult {
    double loss = 0.0;
    Tensor probs; // N x K
};

SoftmaxResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);
// d_logits = (probs - onehot) / N
Tensor softmax_cross_entropy_backward(const SoftmaxResult& r, const std::vector<std::size_t>& labels);

// Row-wise shift-stabilized softmax (no loss).
Tensor softmax(const Tensor& logits);

// ---- local response normalization (cross-channel) ----

struct LrnConfig {
    double k = 2.0;
    std::size_t n = 5;
    double alpha = 1e-4;
    double beta = 0.75;
};

struct LrnCache {
    Tensor input;
    Tensor scale; // k + alpha * window sum of squares, per element
};

Tensor local_response_norm(const Tensor& x, const LrnConfig& cfg, LrnCache* cache = nullptr);
Tensor local_response_norm_backward(const LrnCache& cache, const LrnConfig& cfg, const Tensor& d_out);

// ---- batch normalization ----

struct BatchNormCache {
    Tensor x_hat;
    std::vector<double> mean, var;
};

enum class Mode { train, eval };

constexpr double kBatchNormEps = 1e-5;
constexpr double kBatchNormMomentum = 0.1;

// weights = per-channel scale, bias = per-channel shift. Train mode updates
// running statistics in place.
Tensor batch_norm(const Tensor& x, LayerParams& p, Mode mode, BatchNormCache* cache = nullptr);
GradBundle batch_norm_backward(const BatchNormCache& cache, const LayerParams& p, const Tensor& d_out);

// ---- dropout ----

struct DropoutCache {
    std::vector<std::uint8_t> mask;
    double keep = 1.0;
};

Tensor dropout(const Tensor& x, double p, Mode mode, std::mt19937_64& rng,
               DropoutCache* cache = nullptr);
Tensor dropout_backward(const DropoutCache& cache, const Tensor& d_out);

// ---- channel concat / split ----

Tensor concat_channels(const std::vector<const Tensor*>& xs);
std::vector<Tensor> split_channels(const Tensor& d_out, const std::vector<std::size_t>& channel_counts);

// ---- residual add ----

Tensor residual_add(const Tensor& x, const Tensor& shortcut);

// ---- global average pool: N x C x H x W -> N x C ----

Tensor global_avg_pool(const Tensor& x);
Tensor global_avg_pool_backward(const std::vector<std::size_t>& in_shape, const Tensor& d_out);

} // namespace mcinet::nn

#include "mcinet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcinet::nn {

// ---- convolution ----

static void check_conv_shapes(const Tensor& x, const LayerParams& p) {
    if (x.rank() != 4) throw std::invalid_argument("conv2d: input must be NxCxHxW, got " + x.shape_str());
    if (p.weights.rank() != 4)
        throw std::invalid_argument("conv2d: weights must be CoutxCinxKhxKw, got " + p.weights.shape_str());
    if (x.dim(1) != p.weights.dim(1)) {
        throw std::invalid_argument("conv2d: channel mismatch, input " + x.shape_str() + " vs weights " +
                                    p.weights.shape_str());
    }
    if (p.bias.size() != p.weights.dim(0))
        throw std::invalid_argument("conv2d: bias length does not match output channels");
}

Tensor conv2d(const Tensor& x, const LayerParams& p, std::size_t stride, std::size_t pad,
              ConvCache* cache) {
    check_conv_shapes(x, p);
    const std::size_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Cout = p.weights.dim(0), kh = p.weights.dim(2), kw = p.weights.dim(3);
    const std::size_t Ho = conv_out_extent(H, kh, stride, pad);
    const std::size_t Wo = conv_out_extent(W, kw, stride, pad);

    const Tensor wmat = p.weights.reshaped({Cout, Cin * kh * kw});
    Tensor out({N, Cout, Ho, Wo});
    for (std::size_t n = 0; n < N; ++n) {
        Tensor xi({1, Cin, H, W},
                  std::vector<double>(x.data() + n * Cin * H * W, x.data() + (n + 1) * Cin * H * W));
        const Tensor cols = im2col(xi, kh, kw, stride, pad);
        const Tensor y = gemm(wmat, cols); // Cout x (Ho*Wo)
        double* op = out.data() + n * Cout * Ho * Wo;
        for (std::size_t c = 0; c < Cout; ++c) {
            const double b = p.bias[c];
            const double* yr = y.data() + c * Ho * Wo;
            double* orow = op + c * Ho * Wo;
            for (std::size_t i = 0; i < Ho * Wo; ++i) orow[i] = yr[i] + b;
        }
    }
    if (cache) {
        cache->input = x;
        cache->stride = stride;
        cache->pad = pad;
    }
    return out;
}

GradBundle conv2d_backward(const ConvCache& cache, const LayerParams& p, const Tensor& d_out) {
    const Tensor& x = cache.input;
    const std::size_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Cout = p.weights.dim(0), kh = p.weights.dim(2), kw = p.weights.dim(3);
    const std::size_t stride = cache.stride, pad = cache.pad;
    const std::size_t Ho = conv_out_extent(H, kh, stride, pad);
    const std::size_t Wo = conv_out_extent(W, kw, stride, pad);
    if (d_out.shape() != std::vector<std::size_t>{N, Cout, Ho, Wo})
        throw std::invalid_argument("conv2d_backward: d_out shape " + d_out.shape_str() +
                                    " does not match cached forward");

    const Tensor wmat = p.weights.reshaped({Cout, Cin * kh * kw});
    Tensor d_wmat({Cout, Cin * kh * kw});
    std::vector<double> d_bias(Cout, 0.0);
    Tensor d_input({N, Cin, H, W});

    // transpose of wmat, reused across the batch
    Tensor wmat_t({Cin * kh * kw, Cout});
    for (std::size_t i = 0; i < Cout; ++i)
        for (std::size_t j = 0; j < Cin * kh * kw; ++j)
            wmat_t[j * Cout + i] = wmat[i * Cin * kh * kw + j];

    for (std::size_t n = 0; n < N; ++n) {
        Tensor xi({1, Cin, H, W},
                  std::vector<double>(x.data() + n * Cin * H * W, x.data() + (n + 1) * Cin * H * W));
        const Tensor cols = im2col(xi, kh, kw, stride, pad);
        Tensor dy({Cout, Ho * Wo},
                  std::vector<double>(d_out.data() + n * Cout * Ho * Wo,
                                      d_out.data() + (n + 1) * Cout * Ho * Wo));

        // d_bias: row sums of dy
        for (std::size_t c = 0; c < Cout; ++c) {
            const double* r = dy.data() + c * Ho * Wo;
            double s = 0.0;
            for (std::size_t i = 0; i < Ho * Wo; ++i) s += r[i];
            d_bias[c] += s;
        }

        // d_wmat += dy * cols^T
        Tensor cols_t({Ho * Wo, Cin * kh * kw});
        for (std::size_t i = 0; i < Cin * kh * kw; ++i)
            for (std::size_t j = 0; j < Ho * Wo; ++j)
                cols_t[j * (Cin * kh * kw) + i] = cols[i * (Ho * Wo) + j];
        const Tensor dw = gemm(dy, cols_t);
        for (std::size_t i = 0; i < d_wmat.numel(); ++i) d_wmat[i] += dw[i];

        // d_cols = wmat^T * dy, then scatter back
        const Tensor d_cols = gemm(wmat_t, dy);
        const Tensor dxi = col2im(d_cols, Cin, H, W, kh, kw, stride, pad);
        std::copy(dxi.data(), dxi.data() + Cin * H * W, d_input.data() + n * Cin * H * W);
    }

    GradBundle g;
    g.d_input = std::move(d_input);
    g.d_weights = d_wmat.reshaped({Cout, Cin, kh, kw});
    g.d_bias = std::move(d_bias);
    return g;
}

Tensor conv2d_naive(const Tensor& x, const LayerParams& p, std::size_t stride, std::size_t pad) {
    check_conv_shapes(x, p);
    const std::size_t N = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Cout = p.weights.dim(0), kh = p.weights.dim(2), kw = p.weights.dim(3);
    const std::size_t Ho = conv_out_extent(H, kh, stride, pad);
    const std::size_t Wo = conv_out_extent(W, kw, stride, pad);
    Tensor out({N, Cout, Ho, Wo});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t co = 0; co < Cout; ++co)
            for (std::size_t oh = 0; oh < Ho; ++oh)
                for (std::size_t ow = 0; ow < Wo; ++ow) {
                    double acc = p.bias[co];
                    for (std::size_t ci = 0; ci < Cin; ++ci)
                        for (std::size_t i = 0; i < kh; ++i)
                            for (std::size_t j = 0; j < kw; ++j) {
                                const std::ptrdiff_t ih =
                                    static_cast<std::ptrdiff_t>(oh * stride + i) - static_cast<std::ptrdiff_t>(pad);
                                const std::ptrdiff_t iw =
                                    static_cast<std::ptrdiff_t>(ow * stride + j) - static_cast<std::ptrdiff_t>(pad);
                                if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H) || iw < 0 ||
                                    iw >= static_cast<std::ptrdiff_t>(W))
                                    continue;
                                acc += x.at(n, ci, ih, iw) * p.weights.at(co, ci, i, j);
                            }
                    out.at(n, co, oh, ow) = acc;
                }
    return out;
}

// ---- max pooling ----

Tensor maxpool(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad,
               MaxPoolCache* cache) {
    if (x.rank() != 4) throw std::invalid_argument("maxpool: input must be NxCxHxW");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = conv_out_extent(H, kh, stride, pad);
    const std::size_t Wo = conv_out_extent(W, kw, stride, pad);
    Tensor out({N, C, Ho, Wo});
    std::vector<std::size_t> winners(out.numel(), 0);
    std::size_t oi = 0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t oh = 0; oh < Ho; ++oh)
                for (std::size_t ow = 0; ow < Wo; ++ow, ++oi) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_idx = 0;
                    bool found = false;
                    for (std::size_t i = 0; i < kh; ++i) {
                        const std::ptrdiff_t ih =
                            static_cast<std::ptrdiff_t>(oh * stride + i) - static_cast<std::ptrdiff_t>(pad);
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t j = 0; j < kw; ++j) {
                            const std::ptrdiff_t iw =
                                static_cast<std::ptrdiff_t>(ow * stride + j) - static_cast<std::ptrdiff_t>(pad);
                            if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(W)) continue;
                            const std::size_t idx = ((n * C + c) * H + ih) * W + iw;
                            const double v = x[idx];
                            if (!found || v > best) { // first occurrence wins ties
                                best = v;
                                best_idx = idx;
                                found = true;
                            }
                        }
                    }
                    out[oi] = best;
                    winners[oi] = best_idx;
                }
    if (cache) {
        cache->winners = std::move(winners);
        cache->in_shape = x.shape();
    }
    return out;
}

Tensor maxpool_backward(const MaxPoolCache& cache, const Tensor& d_out) {
    if (d_out.numel() != cache.winners.size())
        throw std::invalid_argument("maxpool_backward: d_out does not match cached forward");
    Tensor d_input(cache.in_shape);
    for (std::size_t i = 0; i < cache.winners.size(); ++i) d_input[cache.winners[i]] += d_out[i];
    return d_input;
}

// ---- relu ----

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& d_out) {
    if (!x.same_shape(d_out)) throw std::invalid_argument("relu_backward: shape mismatch");
    Tensor d = d_out;
    for (std::size_t i = 0; i < d.numel(); ++i)
        if (x[i] <= 0.0) d[i] = 0.0;
    return d;
}

// ---- fully connected ----

Tensor fully_connected(const Tensor& x, const LayerParams& p, FcCache* cache) {
    if (x.rank() != 2 || p.weights.rank() != 2 || x.dim(1) != p.weights.dim(1))
        throw std::invalid_argument("fully_connected: shape mismatch " + x.shape_str() + " vs weights " +
                                    p.weights.shape_str());
    const std::size_t N = x.dim(0), Din = x.dim(1), Dout = p.weights.dim(0);
    if (p.bias.size() != Dout) throw std::invalid_argument("fully_connected: bias length mismatch");
    Tensor wt({Din, Dout});
    for (std::size_t i = 0; i < Dout; ++i)
        for (std::size_t j = 0; j < Din; ++j) wt[j * Dout + i] = p.weights[i * Din + j];
    Tensor y = gemm(x, wt);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < Dout; ++i) y[n * Dout + i] += p.bias[i];
    if (cache) cache->input = x;
    return y;
}

GradBundle fully_connected_backward(const FcCache& cache, const LayerParams& p, const Tensor& d_out) {
    const Tensor& x = cache.input;
    const std::size_t N = x.dim(0), Din = x.dim(1), Dout = p.weights.dim(0);
    if (d_out.shape() != std::vector<std::size_t>{N, Dout})
        throw std::invalid_argument("fully_connected_backward: d_out shape mismatch");
    GradBundle g;
    // dW = d_out^T * x
    Tensor dyt({Dout, N});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < Dout; ++i) dyt[i * N + n] = d_out[n * Dout + i];
    g.d_weights = gemm(dyt, x);
    g.d_bias.assign(Dout, 0.0);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t i = 0; i < Dout; ++i) g.d_bias[i] += d_out[n * Dout + i];
    // dx = d_out * W
    g.d_input = gemm(d_out, p.weights);
    return g;
}

// ---- softmax cross entropy ----

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2) throw std::invalid_argument("softmax: expected NxK logits");
    const std::size_t N = logits.dim(0), K = logits.dim(1);
    Tensor probs({N, K});
    for (std::size_t n = 0; n < N; ++n) {
        const double* row = logits.data() + n * K;
        double mx = row[0];
        for (std::size_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const double e = std::exp(row[k] - mx);
            probs[n * K + k] = e;
            sum += e;
        }
        for (std::size_t k = 0; k < K; ++k) probs[n * K + k] /= sum;
    }
    return probs;
}

SoftmaxResult softmax_cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    const std::size_t N = logits.dim(0), K = logits.dim(1);
    if (labels.size() != N) throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    for (auto l : labels)
        if (l >= K) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    SoftmaxResult r;
    r.probs = softmax(logits);
    double loss = 0.0;
    for (std::size_t n = 0; n < N; ++n)
        loss -= std::log(std::max(r.probs[n * K + labels[n]], 1e-300));
    r.loss = loss / static_cast<double>(N);
    return r;
}

Tensor softmax_cross_entropy_backward(const SoftmaxResult& r, const std::vector<std::size_t>& labels) {
    const std::size_t N = r.probs.dim(0), K = r.probs.dim(1);
    Tensor d = r.probs;
    for (std::size_t n = 0; n < N; ++n) d[n * K + labels[n]] -= 1.0;
    for (auto& v : d.values()) v /= static_cast<double>(N);
    return d;
}

// ---- local response normalization ----

Tensor local_response_norm(const Tensor& x, const LrnConfig& cfg, LrnCache* cache) {
    if (x.rank() != 4) throw std::invalid_argument("lrn: input must be NxCxHxW");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(cfg.n) / 2;
    Tensor scale(x.shape());
    Tensor y(x.shape());
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t lo = static_cast<std::size_t>(
                std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(c) - half));
            const std::size_t hi =
                std::min(C - 1, c + static_cast<std::size_t>(half));
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t w = 0; w < W; ++w) {
                    double ss = 0.0;
                    for (std::size_t cc = lo; cc <= hi; ++cc) {
                        const double v = x.at(n, cc, h, w);
                        ss += v * v;
                    }
                    const double s = cfg.k + cfg.alpha * ss;
                    const std::size_t idx = ((n * C + c) * H + h) * W + w;
                    scale[idx] = s;
                    y[idx] = x[idx] * std::pow(s, -cfg.beta);
                }
        }
    if (cache) {
        cache->input = x;
        cache->scale = std::move(scale);
    }
    return y;
}

Tensor local_response_norm_backward(const LrnCache& cache, const LrnConfig& cfg, const Tensor& d_out) {
    const Tensor& x = cache.input;
    const Tensor& scale = cache.scale;
    if (!x.same_shape(d_out)) throw std::invalid_argument("lrn_backward: shape mismatch");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(cfg.n) / 2;
    Tensor d_input(x.shape());
    // dL/dx_j = dy_j * s_j^-b - 2*a*b*x_j * sum_{c: j in win(c)} dy_c * x_c * s_c^(-b-1)
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t w = 0; w < W; ++w) {
                for (std::size_t j = 0; j < C; ++j) {
                    const std::size_t ji = ((n * C + j) * H + h) * W + w;
                    double acc = d_out[ji] * std::pow(scale[ji], -cfg.beta);
                    const std::size_t lo = static_cast<std::size_t>(
                        std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(j) - half));
                    const std::size_t hi = std::min(C - 1, j + static_cast<std::size_t>(half));
                    double cross = 0.0;
                    for (std::size_t c = lo; c <= hi; ++c) {
                        const std::size_t ci = ((n * C + c) * H + h) * W + w;
                        cross += d_out[ci] * x[ci] * std::pow(scale[ci], -cfg.beta - 1.0);
                    }
                    acc -= 2.0 * cfg.alpha * cfg.beta * x[ji] * cross;
                    d_input[ji] = acc;
                }
            }
    return d_input;
}

// ---- batch normalization ----

Tensor batch_norm(const Tensor& x, LayerParams& p, Mode mode, BatchNormCache* cache) {
    if (x.rank() != 4) throw std::invalid_argument("batch_norm: input must be NxCxHxW");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (p.weights.numel() != C || p.bias.size() != C)
        throw std::invalid_argument("batch_norm: scale/shift length mismatch");
    const std::size_t plane = H * W;
    const double m = static_cast<double>(N * plane);
    std::vector<double> mean(C, 0.0), var(C, 0.0);
    if (mode == Mode::train) {
        for (std::size_t c = 0; c < C; ++c) {
            double s = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* px = x.data() + (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) s += px[i];
            }
            mean[c] = s / m;
            double v = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* px = x.data() + (n * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = px[i] - mean[c];
                    v += d * d;
                }
            }
            var[c] = v / m;
            p.running_mean[c] = (1.0 - kBatchNormMomentum) * p.running_mean[c] + kBatchNormMomentum * mean[c];
            p.running_var[c] = (1.0 - kBatchNormMomentum) * p.running_var[c] + kBatchNormMomentum * var[c];
        }
    } else {
        mean = p.running_mean;
        var = p.running_var;
    }
    Tensor x_hat(x.shape());
    Tensor y(x.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const double inv = 1.0 / std::sqrt(var[c] + kBatchNormEps);
        const double g = p.weights[c], b = p.bias[c], mu = mean[c];
        for (std::size_t n = 0; n < N; ++n) {
            const double* px = x.data() + (n * C + c) * plane;
            double* ph = x_hat.data() + (n * C + c) * plane;
            double* py = y.data() + (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                ph[i] = (px[i] - mu) * inv;
                py[i] = g * ph[i] + b;
            }
        }
    }
    if (cache) {
        cache->x_hat = std::move(x_hat);
        cache->mean = std::move(mean);
        cache->var = std::move(var);
        return y;
    }
    return y;
}

GradBundle batch_norm_backward(const BatchNormCache& cache, const LayerParams& p, const Tensor& d_out) {
    const Tensor& xh = cache.x_hat;
    if (!xh.same_shape(d_out)) throw std::invalid_argument("batch_norm_backward: shape mismatch");
    const std::size_t N = xh.dim(0), C = xh.dim(1), plane = xh.dim(2) * xh.dim(3);
    const double m = static_cast<double>(N * plane);
    GradBundle g;
    g.d_weights = Tensor({C});
    g.d_bias.assign(C, 0.0);
    g.d_input = Tensor(xh.shape());
    for (std::size_t c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double* pd = d_out.data() + (n * C + c) * plane;
            const double* ph = xh.data() + (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += pd[i];
                sum_dy_xh += pd[i] * ph[i];
            }
        }
        g.d_weights[c] = sum_dy_xh;
        g.d_bias[c] = sum_dy;
        const double inv = 1.0 / std::sqrt(cache.var[c] + kBatchNormEps);
        const double gamma = p.weights[c];
        for (std::size_t n = 0; n < N; ++n) {
            const double* pd = d_out.data() + (n * C + c) * plane;
            const double* ph = xh.data() + (n * C + c) * plane;
            double* pi = g.d_input.data() + (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                pi[i] = gamma * inv * (pd[i] - sum_dy / m - ph[i] * sum_dy_xh / m);
            }
        }
    }
    return g;
}

// ---- dropout ----

Tensor dropout(const Tensor& x, double p, Mode mode, std::mt19937_64& rng, DropoutCache* cache) {
    if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must be in [0,1)");
    if (mode == Mode::eval || p == 0.0) {
        if (cache) {
            cache->mask.assign(x.numel(), 1);
            cache->keep = 1.0;
        }
        return x;
    }
    const double keep = 1.0 - p;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor y = x;
    std::vector<std::uint8_t> mask(x.numel());
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const bool live = u(rng) >= p;
        mask[i] = live ? 1 : 0;
        y[i] = live ? y[i] / keep : 0.0;
    }
    if (cache) {
        cache->mask = std::move(mask);
        cache->keep = keep;
    }
    return y;
}

Tensor dropout_backward(const DropoutCache& cache, const Tensor& d_out) {
    if (d_out.numel() != cache.mask.size())
        throw std::invalid_argument("dropout_backward: shape mismatch with cached mask");
    Tensor d = d_out;
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] = cache.mask[i] ? d[i] / cache.keep : 0.0;
    return d;
}

// ---- channel concat / split ----

Tensor concat_channels(const std::vector<const Tensor*>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
    const Tensor& first = *xs[0];
    if (first.rank() != 4) throw std::invalid_argument("concat_channels: inputs must be NxCxHxW");
    const std::size_t N = first.dim(0), H = first.dim(2), W = first.dim(3);
    std::size_t Ctot = 0;
    for (const Tensor* t : xs) {
        if (t->rank() != 4 || t->dim(0) != N || t->dim(2) != H || t->dim(3) != W)
            throw std::invalid_argument("concat_channels: inputs disagree on N/H/W");
        Ctot += t->dim(1);
    }
    Tensor out({N, Ctot, H, W});
    const std::size_t plane = H * W;
    for (std::size_t n = 0; n < N; ++n) {
        std::size_t coff = 0;
        for (const Tensor* t : xs) {
            const std::size_t C = t->dim(1);
            std::copy(t->data() + n * C * plane, t->data() + (n + 1) * C * plane,
                      out.data() + (n * Ctot + coff) * plane);
            coff += C;
        }
    }
    return out;
}

std::vector<Tensor> split_channels(const Tensor& d_out, const std::vector<std::size_t>& channel_counts) {
    const std::size_t N = d_out.dim(0), H = d_out.dim(2), W = d_out.dim(3);
    const std::size_t plane = H * W;
    std::size_t Ctot = 0;
    for (auto c : channel_counts) Ctot += c;
    if (Ctot != d_out.dim(1)) throw std::invalid_argument("split_channels: channel counts do not sum");
    std::vector<Tensor> parts;
    parts.reserve(channel_counts.size());
    std::size_t coff = 0;
    for (auto C : channel_counts) {
        Tensor part({N, C, H, W});
        for (std::size_t n = 0; n < N; ++n)
            std::copy(d_out.data() + (n * Ctot + coff) * plane, d_out.data() + (n * Ctot + coff + C) * plane,
                      part.data() + n * C * plane);
        parts.push_back(std::move(part));
        coff += C;
    }
    return parts;
}

// ---- residual add ----

Tensor residual_add(const Tensor& x, const Tensor& shortcut) {
    if (!x.same_shape(shortcut))
        throw std::invalid_argument("residual_add: shape mismatch " + x.shape_str() + " vs " +
                                    shortcut.shape_str());
    Tensor y = x;
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] += shortcut[i];
    return y;
}

// ---- global average pool ----

Tensor global_avg_pool(const Tensor& x) {
    if (x.rank() != 4) throw std::invalid_argument("global_avg_pool: input must be NxCxHxW");
    const std::size_t N = x.dim(0), C = x.dim(1), plane = x.dim(2) * x.dim(3);
    Tensor y({N, C});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const double* px = x.data() + (n * C + c) * plane;
            double s = 0.0;
            for (std::size_t i = 0; i < plane; ++i) s += px[i];
            y[n * C + c] = s / static_cast<double>(plane);
        }
    return y;
}

Tensor global_avg_pool_backward(const std::vector<std::size_t>& in_shape, const Tensor& d_out) {
    const std::size_t N = in_shape[0], C = in_shape[1], plane = in_shape[2] * in_shape[3];
    if (d_out.shape() != std::vector<std::size_t>{N, C})
        throw std::invalid_argument("global_avg_pool_backward: d_out shape mismatch");
    Tensor d(in_shape);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const double g = d_out[n * C + c] / static_cast<double>(plane);
            double* pd = d.data() + (n * C + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) pd[i] = g;
        }
    return d;
}

} // namespace mcinet::nn

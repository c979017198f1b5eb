#include "mcinet/tensor.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mcinet {

static std::size_t product(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(product(shape_), 0.0) {
    for (auto e : shape_) {
        if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_str());
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (product(shape_) != data_.size()) {
        throw std::invalid_argument("Tensor: shape " + shape_str() + " does not match " +
                                    std::to_string(data_.size()) + " values");
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

double& Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

double Tensor::at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (product(shape) != data_.size()) {
        throw std::invalid_argument("reshape: " + shape_str() + " -> " + shape_to_string(shape) +
                                    " changes element count");
    }
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

std::string shape_to_string(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << ")";
    return os.str();
}

Tensor gemm(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw std::invalid_argument("gemm: shape mismatch " + a.shape_str() + " x " + b.shape_str());
    }
    const std::size_t R = a.dim(0), K = a.dim(1), C = b.dim(1);
    Tensor out({R, C});
    const double* ap = a.data();
    const double* bp = b.data();
    double* op = out.data();
    // i-k-j order, unit-stride inner loop
    for (std::size_t i = 0; i < R; ++i) {
        double* orow = op + i * C;
        for (std::size_t k = 0; k < K; ++k) {
            const double av = ap[i * K + k];
            if (av == 0.0) continue;
            const double* brow = bp + k * C;
            for (std::size_t j = 0; j < C; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    if (stride < 1) throw std::invalid_argument("conv_out_extent: stride must be >= 1");
    if (kernel > in + 2 * pad) {
        throw std::invalid_argument("conv_out_extent: kernel " + std::to_string(kernel) +
                                    " exceeds padded input " + std::to_string(in + 2 * pad));
    }
    return (in + 2 * pad - kernel) / stride + 1;
}

Tensor im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
    if (x.rank() != 4 || x.dim(0) != 1) {
        throw std::invalid_argument("im2col: expected 1xCxHxW input, got " + x.shape_str());
    }
    const std::size_t C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = conv_out_extent(H, kh, stride, pad);
    const std::size_t Wo = conv_out_extent(W, kw, stride, pad);
    Tensor cols({C * kh * kw, Ho * Wo});
    const double* xp = x.data();
    double* cp = cols.data();
    const std::size_t ncols = Ho * Wo;
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
                const std::size_t row = (c * kh + i) * kw + j;
                double* crow = cp + row * ncols;
                for (std::size_t oh = 0; oh < Ho; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + i) -
                                              static_cast<std::ptrdiff_t>(pad);
                    const bool hin = ih >= 0 && ih < static_cast<std::ptrdiff_t>(H);
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride + j) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        double v = 0.0;
                        if (hin && iw >= 0 && iw < static_cast<std::ptrdiff_t>(W))
                            v = xp[(c * H + ih) * W + iw];
                        crow[oh * Wo + ow] = v;
                    }
                }
            }
        }
    }
    return cols;
}

Tensor col2im(const Tensor& cols, std::size_t channels, std::size_t height, std::size_t width,
              std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad) {
    const std::size_t Ho = conv_out_extent(height, kh, stride, pad);
    const std::size_t Wo = conv_out_extent(width, kw, stride, pad);
    if (cols.rank() != 2 || cols.dim(0) != channels * kh * kw || cols.dim(1) != Ho * Wo) {
        throw std::invalid_argument("col2im: column matrix " + cols.shape_str() +
                                    " does not match geometry");
    }
    Tensor img({1, channels, height, width});
    const double* cp = cols.data();
    double* xp = img.data();
    const std::size_t ncols = Ho * Wo;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
                const std::size_t row = (c * kh + i) * kw + j;
                const double* crow = cp + row * ncols;
                for (std::size_t oh = 0; oh < Ho; ++oh) {
                    const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * stride + i) -
                                              static_cast<std::ptrdiff_t>(pad);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(height)) continue;
                    for (std::size_t ow = 0; ow < Wo; ++ow) {
                        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * stride + j) -
                                                  static_cast<std::ptrdiff_t>(pad);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(width)) continue;
                        xp[(c * height + ih) * width + iw] += crow[oh * Wo + ow];
                    }
                }
            }
        }
    }
    return img;
}

std::size_t argmax(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
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

} // namespace

void save_nt(const Tensor& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_nt: cannot open " + path);
    os.write("NTSR", 4);
    os.put(1);
    os.put(static_cast<char>(t.rank()));
    for (auto e : t.shape()) put_u32(os, static_cast<std::uint32_t>(e));
    for (double v : t.values()) put_f64(os, v);
    if (!os) throw std::runtime_error("save_nt: write failed for " + path);
}

Tensor load_nt(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_nt: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "NTSR", 4) != 0)
        throw std::runtime_error("load_nt: bad magic in " + path);
    const int version = is.get();
    if (version != 1) throw std::runtime_error("load_nt: unsupported version in " + path);
    const int rank = is.get();
    if (rank < 0 || rank > 8) throw std::runtime_error("load_nt: bad rank in " + path);
    std::vector<std::size_t> shape(static_cast<std::size_t>(rank));
    for (auto& e : shape) e = get_u32(is);
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    std::vector<double> vals(n);
    for (auto& v : vals) v = get_f64(is);
    if (!is) throw std::runtime_error("load_nt: truncated payload in " + path);
    return Tensor(std::move(shape), std::move(vals));
}

} // namespace mcinet

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mcinet {

// Dense N-d array of doubles, row-major, canonical image layout N x C x H x W.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t numel() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // 4-d accessor, NCHW
    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

    // Same data, new shape; element count must match.
    Tensor reshaped(std::vector<std::size_t> shape) const;

    void fill(double v);
    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::size_t>& s);

// out[i][j] = sum_k a[i][k] * b[k][j]. Both inputs rank 2; inner dims must agree.
Tensor gemm(const Tensor& a, const Tensor& b);

// floor((in + 2*pad - kernel) / stride) + 1. Throws if the kernel exceeds the padded input.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

// Receptive-field rearrangement of a single image (1 x C x H x W) into a
// (C*kh*kw) x (Ho*Wo) matrix. Column j is the window of output position j,
// row-major over Ho x Wo; padded positions contribute zero.
Tensor im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad);

// Adjoint of im2col: scatter-add columns back into a 1 x C x H x W image.
Tensor col2im(const Tensor& cols, std::size_t channels, std::size_t height, std::size_t width,
              std::size_t kh, std::size_t kw, std::size_t stride, std::size_t pad);

// Index of the maximum element; ties resolve to the lowest index. Throws on empty input.
std::size_t argmax(const std::vector<double>& v);

// ".nt" raw tensor file: magic "NTSR", u8 version=1, u8 rank, rank x u32 LE
// extents, then numel f64 LE values.
void save_nt(const Tensor& t, const std::string& path);
Tensor load_nt(const std::string& path);

} // namespace mcinet

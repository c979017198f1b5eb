#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcinet/tensor.hpp"

namespace mcinet::nn {

// Central-difference check of an operation against its analytic backward.
//
// The scalar loss is a random projection of the op output: L = sum_i y_i * r_i
// with r drawn from `proj_seed`. `forward` evaluates the op on the current
// contents of `inputs`; `backward` returns dL/d(input) for each entry of
// `inputs` given d_out = r. Returns the max relative error
// |a - n| / max(1e-8, |a| + |n|) over all input elements.
double grad_check(const std::function<Tensor()>& forward,
                  const std::function<std::vector<Tensor>(const Tensor& d_out)>& backward,
                  const std::vector<Tensor*>& inputs, double eps = 1e-5,
                  std::uint64_t proj_seed = 1);

struct GradSuiteEntry {
    std::string layer;
    double max_rel_err = 0.0;
    std::size_t instances = 0;
};

// Seeded random-instance gradient suite covering every differentiable layer
// type. `instances_per_layer` small random cases per layer, inputs kept away
// from relu/maxpool non-smooth points.
std::vector<GradSuiteEntry> run_gradient_suite(std::size_t instances_per_layer = 20,
                                               std::uint64_t seed = 7);

} // namespace mcinet::nn

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fmn/model.hpp"

namespace fmn {

/// Central differences of the attack loss with step `h`.
std::vector<double> finite_difference_gradient(const ModelSpec& model, const Tensor& x, std::size_t y,
                                               LossKind loss, double h = 1e-5);

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6);

/// True when every ReLU pre-activation keeps its sign, and the LL runner-up
/// stays the same, on x +/- h along each coordinate. Central differences
/// are only meaningful on such points.
bool smooth_around(const ModelSpec& model, const Tensor& x, std::size_t y, double h = 1e-5);

struct GradCheckReport {
  std::size_t cases = 0;
  std::size_t skipped = 0;  // draws rejected for sitting on a kink
  double max_rel_error = 0.0;
};

/// Draws `trials` random (input, label, loss) triples for `model`.
GradCheckReport gradient_check(const ModelSpec& model, std::size_t trials, std::uint64_t seed);

}  // namespace fmn

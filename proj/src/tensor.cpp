#include "fmn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "fmn/errors.hpp"

namespace fmn {

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.empty()) throw ShapeError("tensor shape must have at least one dimension");
  std::size_t n = 1;
  for (auto d : shape_) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
    n *= d;
  }
  if (n != data_.size()) {
    throw ShapeError("tensor shape product " + std::to_string(n) + " != data length " +
                     std::to_string(data_.size()));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError(0, "non-finite tensor entry at index " + std::to_string(i));
    }
  }
}

Tensor::Tensor(std::vector<double> data) : Tensor(std::vector<std::size_t>{data.size()}, data) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double norm_l1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

double norm_l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace fmn

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fmn {

/// Dense row-major array of doubles. All entries are finite on construction.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  /// 1-D tensor wrapping `data`.
  explicit Tensor(std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

double norm_inf(std::span<const double> v);
double norm_l1(std::span<const double> v);
double norm_l2(std::span<const double> v);

}  // namespace fmn

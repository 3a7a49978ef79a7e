#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "fmn/tensor.hpp"

namespace fmn {

enum class OptimizerKind { SGD, Adam };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(std::string_view name);

struct OptimizerParams {
  OptimizerKind kind = OptimizerKind::SGD;
  double weight_decay = 0.0;
  // SGD
  double momentum = 0.0;
  double dampening = 0.0;
  bool nesterov = false;
  // Adam
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool amsgrad = false;

  /// Throws ContractError when a field is out of its admissible range.
  void validate() const;

  friend bool operator==(const OptimizerParams&, const OptimizerParams&) = default;
};

/// Per-sample optimizer memory. Buffers are sized on first use.
struct OptimizerState {
  std::int64_t step_count = 0;
  std::vector<double> momentum_buffer;  // SGD with momentum > 0
  std::vector<double> exp_avg;          // Adam m
  std::vector<double> exp_avg_sq;       // Adam v
  std::vector<double> max_exp_avg_sq;   // Adam v_max (amsgrad)
};

// Each step takes the l2-normalized gradient and the externally scheduled
// step size, and returns the updated perturbation (descent direction).
Tensor sgd_step(OptimizerState& state, const Tensor& delta, const Tensor& grad, double step_size,
                const OptimizerParams& p);
Tensor adam_step(OptimizerState& state, const Tensor& delta, const Tensor& grad, double step_size,
                 const OptimizerParams& p);
Tensor optimizer_step(OptimizerState& state, const Tensor& delta, const Tensor& grad, double step_size,
                      const OptimizerParams& p);

}  // namespace fmn

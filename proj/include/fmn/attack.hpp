#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fmn/dataset.hpp"
#include "fmn/losses.hpp"
#include "fmn/model.hpp"
#include "fmn/optimizers.hpp"
#include "fmn/schedulers.hpp"
#include "fmn/tensor.hpp"

namespace fmn {

/// Hyperparameters of one l-inf minimum-norm attack.
struct AttackConfig {
  LossKind loss = LossKind::LL;
  OptimizerParams optimizer;
  SchedulerParams scheduler;
  double alpha0 = 1.0;          // initial delta-step size
  std::int64_t iterations = 100;  // K, horizon of the gamma and step-size schedules
  double gamma0 = 0.05;
  double gamma_min = 0.001;

  void validate() const;

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

struct AttackState {
  Tensor delta;
  double epsilon = 0.0;
  std::optional<Tensor> best_delta;
  double best_norm = std::numeric_limits<double>::infinity();
  bool found = false;
  std::int64_t k = 0;
};

struct TraceRecord {
  double loss = 0.0;
  double epsilon = 0.0;
  double step_size = 0.0;
  double delta_norm = 0.0;  // ||delta_{k-1}||_inf, the iterate the loss was evaluated at
  double best_norm = 0.0;   // best norm after inspecting that iterate
};

struct AttackResult {
  bool success = false;
  std::optional<Tensor> best_delta;
  double norm = std::numeric_limits<double>::infinity();
  std::int64_t iterations_run = 0;
  std::vector<TraceRecord> trace;
  std::string diagnostic;  // non-empty when the run was aborted
};

struct AttackOptions {
  bool record_trace = false;
  /// Stop after this many iterations (<= cfg.iterations). The schedules
  /// still use cfg.iterations as horizon, so a shorter budget runs an exact
  /// prefix of the full attack. 0 means cfg.iterations.
  std::int64_t budget = 0;
};

/// Cosine decay of the epsilon-step size, for 1 <= k <= K.
double gamma_decay(std::int64_t k, std::int64_t K, double gamma0, double gamma_min);

/// New epsilon given the iterate in `state` (delta, epsilon, found).
///  - adversarial now:          min(eps, ||delta||_inf) * (1 - gamma)
///  - adversarial seen earlier: eps * (1 + gamma)
///  - never adversarial:        ||delta||_inf + |loss| / ||grad||_1
double epsilon_step(const AttackState& state, double gamma, double loss, const Tensor& grad,
                    bool adversarial_now);

/// Joint projection onto the eps-ball and the [0,1] box around x0.
Tensor project(const Tensor& x0, const Tensor& delta, double epsilon);

AttackResult run_attack(const ModelSpec& model, const Tensor& x, std::size_t y, const AttackConfig& cfg,
                        const AttackOptions& options = {});

/// One attack per sample, spread over `jobs` OpenMP threads (0 = runtime
/// default). Output order matches the dataset; results do not depend on `jobs`.
std::vector<AttackResult> run_batch(const ModelSpec& model, const Dataset& data, const AttackConfig& cfg,
                                    int jobs = 0, const AttackOptions& options = {});

/// Single-threaded reference for run_batch.
std::vector<AttackResult> run_batch_serial(const ModelSpec& model, const Dataset& data,
                                           const AttackConfig& cfg, const AttackOptions& options = {});

}  // namespace fmn

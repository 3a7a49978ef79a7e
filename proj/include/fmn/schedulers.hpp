#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace fmn {

enum class SchedulerKind { CALR, CAWR, MSLR, RLROP };

std::string_view to_string(SchedulerKind kind);
SchedulerKind parse_scheduler_kind(std::string_view name);

struct SchedulerParams {
  SchedulerKind kind = SchedulerKind::CALR;
  // CALR (eta_min also floors CAWR)
  std::int64_t t_max = 100;
  double eta_min = 0.0;
  // CAWR
  std::int64_t t_0 = 10;
  std::int64_t t_mult = 1;
  // MSLR
  std::vector<std::int64_t> milestones;
  double gamma = 0.1;
  // RLROP
  double factor = 0.1;
  std::int64_t patience = 5;
  double threshold = 1e-5;

  void validate() const;

  friend bool operator==(const SchedulerParams&, const SchedulerParams&) = default;
};

/// Cosine annealing from alpha0 at k=0 down to eta_min at k=t_max. k is
/// clamped into [0, t_max].
double calr(std::int64_t k, double alpha0, std::int64_t t_max, double eta_min);

/// Cosine annealing restarted at the end of every cycle; cycle i has length
/// t_0 * t_mult^i.
double cawr(std::int64_t k, double alpha0, std::int64_t t_0, std::int64_t t_mult, double eta_min);

/// alpha0 * gamma^(number of milestones <= k).
double mslr(std::int64_t k, double alpha0, const std::vector<std::int64_t>& milestones, double gamma);

struct PlateauState {
  double alpha = 0.0;
  double best_metric = std::numeric_limits<double>::infinity();
  std::int64_t bad_steps = 0;
};

/// Reduce-on-plateau in min mode with an absolute threshold. Returns the
/// current step size after taking `metric` into account.
double rlrop_observe(PlateauState& state, double metric, const SchedulerParams& p);

/// Step-size source for one attacked sample.
class StepScheduler {
 public:
  StepScheduler(SchedulerParams params, double alpha0);

  /// Step size for the zero-based scheduler index `k`; `metric` is consumed
  /// by RLROP only.
  double step_size(std::int64_t k, double metric);

 private:
  SchedulerParams params_;
  double alpha0_;
  PlateauState plateau_;
};

}  // namespace fmn

#include "fmn/schedulers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "fmn/errors.hpp"

namespace fmn {

std::string_view to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::CALR: return "calr";
    case SchedulerKind::CAWR: return "cawr";
    case SchedulerKind::MSLR: return "mslr";
    case SchedulerKind::RLROP: return "rlrop";
  }
  return "?";
}

SchedulerKind parse_scheduler_kind(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "calr") return SchedulerKind::CALR;
  if (s == "cawr") return SchedulerKind::CAWR;
  if (s == "mslr") return SchedulerKind::MSLR;
  if (s == "rlrop") return SchedulerKind::RLROP;
  throw ParseError("scheduler.kind", "unknown scheduler '" + std::string(name) + "'");
}

void SchedulerParams::validate() const {
  switch (kind) {
    case SchedulerKind::CALR:
      if (t_max <= 0) throw ContractError("t_max must be > 0");
      if (!(eta_min >= 0.0)) throw ContractError("eta_min must be >= 0");
      break;
    case SchedulerKind::CAWR:
      if (t_0 <= 0) throw ContractError("t_0 must be > 0");
      if (t_mult < 1) throw ContractError("t_mult must be >= 1");
      if (!(eta_min >= 0.0)) throw ContractError("eta_min must be >= 0");
      break;
    case SchedulerKind::MSLR:
      if (!(gamma > 0.0 && gamma < 1.0)) throw ContractError("gamma must be in (0,1)");
      for (std::size_t i = 1; i < milestones.size(); ++i) {
        if (milestones[i] <= milestones[i - 1]) throw ContractError("milestones must be strictly increasing");
      }
      break;
    case SchedulerKind::RLROP:
      if (!(factor > 0.0 && factor < 1.0)) throw ContractError("factor must be in (0,1)");
      if (patience < 0) throw ContractError("patience must be >= 0");
      if (!(threshold >= 0.0)) throw ContractError("threshold must be >= 0");
      break;
  }
}

double calr(std::int64_t k, double alpha0, std::int64_t t_max, double eta_min) {
  k = std::clamp<std::int64_t>(k, 0, t_max);
  if (k == 0) return alpha0;
  if (k == t_max) return eta_min;
  const double c = std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(t_max));
  return eta_min + (alpha0 - eta_min) * (1.0 + c) / 2.0;
}

double cawr(std::int64_t k, double alpha0, std::int64_t t_0, std::int64_t t_mult, double eta_min) {
  k = std::max<std::int64_t>(k, 0);
  std::int64_t len = t_0;
  if (t_mult == 1) return calr(k % t_0, alpha0, t_0, eta_min);
  while (k >= len) {
    k -= len;
    len *= t_mult;
  }
  return calr(k, alpha0, len, eta_min);
}

double mslr(std::int64_t k, double alpha0, const std::vector<std::int64_t>& milestones, double gamma) {
  const auto passed = std::upper_bound(milestones.begin(), milestones.end(), k) - milestones.begin();
  return alpha0 * std::pow(gamma, static_cast<double>(passed));
}

double rlrop_observe(PlateauState& state, double metric, const SchedulerParams& p) {
  if (metric < state.best_metric - p.threshold) {
    state.best_metric = metric;
    state.bad_steps = 0;
  } else {
    ++state.bad_steps;
  }
  if (state.bad_steps > p.patience) {
    state.alpha *= p.factor;
    state.bad_steps = 0;
  }
  return state.alpha;
}

StepScheduler::StepScheduler(SchedulerParams params, double alpha0)
    : params_(std::move(params)), alpha0_(alpha0) {
  plateau_.alpha = alpha0;
}

double StepScheduler::step_size(std::int64_t k, double metric) {
  switch (params_.kind) {
    case SchedulerKind::CALR: return calr(k, alpha0_, params_.t_max, params_.eta_min);
    case SchedulerKind::CAWR: return cawr(k, alpha0_, params_.t_0, params_.t_mult, params_.eta_min);
    case SchedulerKind::MSLR: return mslr(k, alpha0_, params_.milestones, params_.gamma);
    case SchedulerKind::RLROP: return rlrop_observe(plateau_, metric, params_);
  }
  return alpha0_;
}

}  // namespace fmn

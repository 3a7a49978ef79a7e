#include "fmn/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <omp.h>

#include "fmn/errors.hpp"

namespace fmn {

void AttackConfig::validate() const {
  if (!(alpha0 > 0.0)) throw ContractError("alpha0 must be > 0");
  if (iterations <= 0) throw ContractError("iterations must be > 0");
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) throw ContractError("gamma0 must be in (0,1)");
  if (!(gamma_min > 0.0 && gamma_min < gamma0)) throw ContractError("gamma_min must be in (0, gamma0)");
  optimizer.validate();
  scheduler.validate();
}

double gamma_decay(std::int64_t k, std::int64_t K, double gamma0, double gamma_min) {
  if (k >= K) return gamma_min;
  const double c = std::cos(std::numbers::pi * static_cast<double>(k) / static_cast<double>(K));
  return gamma_min + (gamma0 - gamma_min) * (1.0 + c) / 2.0;
}

double epsilon_step(const AttackState& state, double gamma, double loss, const Tensor& grad,
                    bool adversarial_now) {
  const double delta_norm = norm_inf(state.delta.values());
  if (adversarial_now) return std::min(state.epsilon, delta_norm) * (1.0 - gamma);
  if (state.found) return state.epsilon * (1.0 + gamma);
  const double g1 = norm_l1(grad.values());
  if (g1 == 0.0) return state.epsilon * (1.0 + gamma);
  return delta_norm + std::abs(loss) / g1;
}

Tensor project(const Tensor& x0, const Tensor& delta, double epsilon) {
  if (!x0.same_shape(delta)) throw ShapeError("project: x0 and delta shapes differ");
  std::vector<double> out(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double d = std::clamp(delta[i], -epsilon, epsilon);
    out[i] = std::clamp(d, -x0[i], 1.0 - x0[i]);
  }
  return Tensor(delta.shape(), std::move(out));
}

namespace {

Tensor add(const Tensor& a, const Tensor& b) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return Tensor(a.shape(), std::move(out));
}

void consider(AttackState& state, bool adversarial, double delta_norm) {
  if (adversarial && delta_norm < state.best_norm) {
    state.best_norm = delta_norm;
    state.best_delta = state.delta;
  }
  state.found = state.found || adversarial;
}

AttackResult finish(AttackState& state, std::int64_t iterations, std::vector<TraceRecord> trace) {
  AttackResult r;
  r.success = state.best_delta.has_value();
  r.norm = state.best_norm;
  r.best_delta = std::move(state.best_delta);
  r.iterations_run = iterations;
  r.trace = std::move(trace);
  return r;
}

}  // namespace

AttackResult run_attack(const ModelSpec& model, const Tensor& x, std::size_t y, const AttackConfig& cfg,
                        const AttackOptions& options) {
  cfg.validate();
  if (y >= model.num_classes()) throw ContractError("label out of range");
  const std::int64_t K = cfg.iterations;
  const std::int64_t budget = options.budget > 0 ? std::min(options.budget, K) : K;

  AttackState state;
  state.delta = Tensor::zeros(x.shape());

  if (predict(model, x) != y) {
    state.best_norm = 0.0;
    state.best_delta = state.delta;
    state.found = true;
    return finish(state, 0, {});
  }

  OptimizerState opt;
  StepScheduler scheduler(cfg.scheduler, cfg.alpha0);
  std::vector<TraceRecord> trace;
  if (options.record_trace) trace.reserve(static_cast<std::size_t>(budget));

  try {
    for (std::int64_t k = 1; k <= budget; ++k) {
      state.k = k;
      const auto ig = input_gradient(model, add(x, state.delta), y, cfg.loss);
      const bool adversarial = argmax(ig.logits) != y;
      const double delta_norm = norm_inf(state.delta.values());
      consider(state, adversarial, delta_norm);

      const double gamma = gamma_decay(k, K, cfg.gamma0, cfg.gamma_min);
      const double epsilon = epsilon_step(state, gamma, ig.value, ig.grad, adversarial);
      const double alpha = scheduler.step_size(k - 1, ig.value);
      state.epsilon = epsilon;

      Tensor unit = ig.grad;
      const double g2 = norm_l2(ig.grad.values());
      for (double& v : unit.values()) v = g2 > 0.0 ? v / g2 : 0.0;

      state.delta = project(x, optimizer_step(opt, state.delta, unit, alpha, cfg.optimizer), state.epsilon);

      if (options.record_trace) trace.push_back({ig.value, epsilon, alpha, delta_norm, state.best_norm});
    }
    const Tensor last = add(x, state.delta);
    consider(state, predict(model, last) != y, norm_inf(state.delta.values()));
  } catch (const NumericError& e) {
    auto r = finish(state, state.k, std::move(trace));
    r.diagnostic = std::string("numeric failure at iteration ") + std::to_string(state.k) + ": " + e.what();
    return r;
  }
  return finish(state, budget, std::move(trace));
}

std::vector<AttackResult> run_batch_serial(const ModelSpec& model, const Dataset& data,
                                           const AttackConfig& cfg, const AttackOptions& options) {
  std::vector<AttackResult> results;
  results.reserve(data.size());
  for (const auto& s : data.samples) results.push_back(run_attack(model, s.x, s.label, cfg, options));
  return results;
}

std::vector<AttackResult> run_batch(const ModelSpec& model, const Dataset& data, const AttackConfig& cfg,
                                    int jobs, const AttackOptions& options) {
  cfg.validate();
  for (const auto& s : data.samples) {
    if (s.label >= model.num_classes()) throw ContractError("label out of range");
    if (s.x.size() != model.input_dim()) throw ShapeError("sample dimension does not match model");
  }
  const auto n = static_cast<std::int64_t>(data.size());
  std::vector<AttackResult> results(data.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& s = data.samples[static_cast<std::size_t>(i)];
    results[static_cast<std::size_t>(i)] = run_attack(model, s.x, s.label, cfg, options);
  }
  return results;
}

}  // namespace fmn

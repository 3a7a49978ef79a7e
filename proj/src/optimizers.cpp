#include "fmn/optimizers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fmn/errors.hpp"

namespace fmn {

std::string_view to_string(OptimizerKind kind) { return kind == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(std::string_view name) {
  if (name == "sgd" || name == "SGD") return OptimizerKind::SGD;
  if (name == "adam" || name == "Adam") return OptimizerKind::Adam;
  throw ParseError("optimizer.kind", "unknown optimizer '" + std::string(name) + "'");
}

void OptimizerParams::validate() const {
  if (!(weight_decay >= 0.0)) throw ContractError("weight_decay must be >= 0");
  if (kind == OptimizerKind::SGD) {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractError("momentum must be in [0,1)");
    if (!(dampening >= 0.0 && dampening <= 1.0)) throw ContractError("dampening must be in [0,1]");
    if (nesterov && (momentum <= 0.0 || dampening != 0.0)) {
      throw ContractError("nesterov requires momentum > 0 and dampening = 0");
    }
  } else {
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ContractError("beta1 must be in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ContractError("beta2 must be in [0,1)");
    if (!(eps > 0.0)) throw ContractError("eps must be > 0");
  }
}

namespace {

void check_shapes(const Tensor& delta, const Tensor& grad) {
  if (!delta.same_shape(grad)) throw ShapeError("optimizer: gradient shape differs from perturbation");
}

void ensure_buffer(std::vector<double>& buf, std::size_t n) {
  if (buf.empty()) {
    buf.assign(n, 0.0);
  } else if (buf.size() != n) {
    throw ShapeError("optimizer: state shape changed between steps");
  }
}

}  // namespace

Tensor sgd_step(OptimizerState& state, const Tensor& delta, const Tensor& grad, double step_size,
                const OptimizerParams& p) {
  check_shapes(delta, grad);
  const std::size_t n = delta.size();
  const bool first = state.step_count == 0;
  ++state.step_count;

  std::vector<double> out(n);
  const bool use_momentum = p.momentum != 0.0;
  if (use_momentum) ensure_buffer(state.momentum_buffer, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i] + p.weight_decay * delta[i];
    double dir = g;
    if (use_momentum) {
      double& b = state.momentum_buffer[i];
      b = first ? g : p.momentum * b + (1.0 - p.dampening) * g;
      dir = p.nesterov ? g + p.momentum * b : b;
    }
    out[i] = delta[i] - step_size * dir;
  }
  return Tensor(delta.shape(), std::move(out));
}

Tensor adam_step(OptimizerState& state, const Tensor& delta, const Tensor& grad, double step_size,
                 const OptimizerParams& p) {
  check_shapes(delta, grad);
  const std::size_t n = delta.size();
  ensure_buffer(state.exp_avg, n);
  ensure_buffer(state.exp_avg_sq, n);
  if (p.amsgrad) ensure_buffer(state.max_exp_avg_sq, n);
  ++state.step_count;

  const double k = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(p.beta1, k);
  const double bc2 = 1.0 - std::pow(p.beta2, k);

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i] + p.weight_decay * delta[i];
    double& m = state.exp_avg[i];
    double& v = state.exp_avg_sq[i];
    m = p.beta1 * m + (1.0 - p.beta1) * g;
    v = p.beta2 * v + (1.0 - p.beta2) * g * g;
    double second = v;
    if (p.amsgrad) {
      double& vmax = state.max_exp_avg_sq[i];
      vmax = std::max(vmax, v);
      second = vmax;
    }
    const double m_hat = m / bc1;
    const double v_hat = second / bc2;
    out[i] = delta[i] - step_size * m_hat / (std::sqrt(v_hat) + p.eps);
  }
  return Tensor(delta.shape(), std::move(out));
}

Tensor optimizer_step(OptimizerState& state, const Tensor& delta, const Tensor& grad, double step_size,
                      const OptimizerParams& p) {
  return p.kind == OptimizerKind::SGD ? sgd_step(state, delta, grad, step_size, p)
                                      : adam_step(state, delta, grad, step_size, p);
}

}  // namespace fmn

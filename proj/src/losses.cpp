#include "fmn/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fmn/errors.hpp"
#include "fmn/model.hpp"

namespace fmn {

namespace {

void check_label(std::span<const double> logits, std::size_t y) {
  if (logits.size() < 2) throw ContractError("loss needs at least two logits");
  if (y >= logits.size()) throw ContractError("label " + std::to_string(y) + " out of range");
}

double log_sum_exp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

std::string_view to_string(LossKind kind) { return kind == LossKind::LL ? "LL" : "CE"; }

LossKind parse_loss_kind(std::string_view name) {
  if (name == "LL" || name == "ll") return LossKind::LL;
  if (name == "CE" || name == "ce") return LossKind::CE;
  throw ParseError("loss", "unknown loss '" + std::string(name) + "'");
}

std::size_t runner_up(std::span<const double> logits, std::size_t y) {
  check_label(logits, y);
  std::size_t best = y == 0 ? 1 : 0;
  for (std::size_t j = best + 1; j < logits.size(); ++j) {
    if (j != y && logits[j] > logits[best]) best = j;
  }
  return best;
}

double loss_value(LossKind kind, std::span<const double> logits, std::size_t y) {
  check_label(logits, y);
  if (kind == LossKind::LL) return logits[y] - logits[runner_up(logits, y)];
  return logits[y] - log_sum_exp(logits);
}

std::vector<double> loss_grad_logits(LossKind kind, std::span<const double> logits, std::size_t y) {
  check_label(logits, y);
  std::vector<double> g(logits.size(), 0.0);
  if (kind == LossKind::LL) {
    g[y] = 1.0;
    g[runner_up(logits, y)] = -1.0;
    return g;
  }
  const double lse = log_sum_exp(logits);
  for (std::size_t j = 0; j < logits.size(); ++j) g[j] = -std::exp(logits[j] - lse);
  g[y] += 1.0;
  return g;
}

bool is_adversarial(const ModelSpec& model, const Tensor& x_adv, std::size_t y) {
  return predict(model, x_adv) != y;
}

}  // namespace fmn

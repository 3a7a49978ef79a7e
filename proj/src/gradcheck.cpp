#include "fmn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fmn {

namespace {

// Signs of every ReLU input plus the runner-up logit index.
std::vector<int> kink_signature(const ModelSpec& model, const std::vector<double>& x, std::size_t y) {
  std::vector<int> sig;
  std::vector<double> a = x;
  for (const auto& layer : model.layers()) {
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      std::vector<double> out(d->out_dim);
      for (std::size_t r = 0; r < d->out_dim; ++r) {
        double s = d->bias[r];
        for (std::size_t c = 0; c < d->in_dim; ++c) s += d->weights[r * d->in_dim + c] * a[c];
        out[r] = s;
      }
      a.swap(out);
    } else {
      for (auto& v : a) {
        sig.push_back(v > 0.0 ? 1 : 0);
        v = std::max(v, 0.0);
      }
    }
  }
  sig.push_back(static_cast<int>(runner_up(a, y)));
  return sig;
}

}  // namespace

std::vector<double> finite_difference_gradient(const ModelSpec& model, const Tensor& x, std::size_t y,
                                               LossKind loss, double h) {
  std::vector<double> g(x.size());
  std::vector<double> probe = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = loss_value(loss, forward(model, Tensor(probe)).values(), y);
    probe[i] = x[i] - h;
    const double down = loss_value(loss, forward(model, Tensor(probe)).values(), y);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

bool smooth_around(const ModelSpec& model, const Tensor& x, std::size_t y, double h) {
  const auto base = kink_signature(model, x.data(), y);
  std::vector<double> probe = x.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (double s : {h, -h}) {
      probe[i] = x[i] + s;
      if (kink_signature(model, probe, y) != base) return false;
    }
    probe[i] = x[i];
  }
  return true;
}

GradCheckReport gradient_check(const ModelSpec& model, std::size_t trials, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> uy(0, model.num_classes() - 1);
  GradCheckReport report;
  while (report.cases < trials) {
    std::vector<double> xs(model.input_dim());
    for (auto& v : xs) v = ux(rng);
    const Tensor x(std::move(xs));
    const std::size_t y = uy(rng);
    const LossKind loss = report.cases % 2 == 0 ? LossKind::LL : LossKind::CE;
    if (!smooth_around(model, x, y)) {
      ++report.skipped;
      if (report.skipped > 100 * trials + 1000) break;
      continue;
    }
    const auto ig = input_gradient(model, x, y, loss);
    const auto fd = finite_difference_gradient(model, x, y, loss);
    report.max_rel_error = std::max(report.max_rel_error, max_relative_error(ig.grad.values(), fd));
    ++report.cases;
  }
  return report;
}

}  // namespace fmn

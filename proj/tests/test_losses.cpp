#include <doctest.h>

#include <cmath>
#include <random>

#include "fmn/fixtures.hpp"
#include "fmn/losses.hpp"
#include "fmn/model.hpp"
#include "oracles.hpp"

using namespace fmn;

TEST_CASE("loss values") {
  const std::vector<double> z = {2.0, 5.0, 1.0};
  CHECK(loss_value(LossKind::LL, z, 1) == 3.0);
  CHECK(loss_value(LossKind::LL, z, 0) == -3.0);
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(loss_value(LossKind::CE, zero, 0) == doctest::Approx(-0.6931471805599453).epsilon(1e-15));
}

TEST_CASE("CE is shift invariant and stable for large logits") {
  const std::vector<double> z = {1.0, -2.0, 0.5};
  std::vector<double> shifted = z;
  for (auto& v : shifted) v += 800.0;
  CHECK(loss_value(LossKind::CE, shifted, 2) == doctest::Approx(loss_value(LossKind::CE, z, 2)).epsilon(1e-12));
  CHECK(std::isfinite(loss_value(LossKind::CE, std::vector<double>{1000.0, -1000.0}, 1)));
}

TEST_CASE("LL gradient and runner-up ties") {
  const std::vector<double> z = {2.0, 5.0, 1.0};
  CHECK(loss_grad_logits(LossKind::LL, z, 1) == std::vector<double>{-1.0, 1.0, 0.0});
  const std::vector<double> tied = {3.0, 1.0, 1.0};
  CHECK(runner_up(tied, 0) == 1);
  CHECK(loss_grad_logits(LossKind::LL, tied, 0) == std::vector<double>{1.0, -1.0, 0.0});
}

TEST_CASE("CE gradient matches finite differences of the loss") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> z(5);
    for (auto& v : z) v = n(rng);
    const std::size_t y = t % 5;
    const auto g = loss_grad_logits(LossKind::CE, z, y);
    // Five-point stencil: O(h^4) truncation keeps the oracle well below 1e-6.
    const double h = 1e-3;
    std::vector<double> fd(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      auto at = [&](double s) {
        auto p = z;
        p[i] += s;
        return loss_value(LossKind::CE, p, y);
      };
      fd[i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    }
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(std::abs(g[i] - fd[i]) / std::max({std::abs(g[i]), std::abs(fd[i]), 1e-6}) < 1e-6);
    }
  }
}

TEST_CASE("is_adversarial agrees with the sign of LL") {
  DenseLayer d{2, 2, {1, 0, 0, 1}, {0, 0}};
  const ModelSpec id({d}, 2, 2);
  CHECK_FALSE(is_adversarial(id, Tensor({0.3, 0.7}), 1));
  CHECK(is_adversarial(id, Tensor({0.3, 0.7}), 0));

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0, 1);
  int checked = 0, agree = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto m = fixtures::random_mlp({3, 6, 3}, rng);
    std::vector<double> x(3);
    for (auto& v : x) v = u(rng);
    const std::size_t y = t % 3;
    const auto z = oracle::forward(m, x);
    const double l = oracle::ll(z, y);
    if (l == 0.0) continue;
    ++checked;
    agree += is_adversarial(m, Tensor(x), y) == (l < 0.0);
  }
  CHECK(agree == checked);
  CHECK(checked > 990);
}

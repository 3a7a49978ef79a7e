#include "fmn/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "fmn/errors.hpp"

namespace fmn::fixtures {

LinearCase make_linear_case(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> ux(0.2, 0.8);
  std::uniform_real_distribution<double> ud(0.02, 0.1);
  std::bernoulli_distribution coin(0.5);

  std::vector<double> w(dim);
  std::vector<double> x(dim);
  for (auto& v : w) v = normal(rng);
  for (auto& v : x) v = ux(rng);
  const double distance = ud(rng);
  const double sign = coin(rng) ? 1.0 : -1.0;
  const double w1 = norm_l1(w);
  const double wx = std::inner_product(w.begin(), w.end(), x.begin(), 0.0);
  const double b = sign * distance * w1 - wx;

  DenseLayer d;
  d.in_dim = dim;
  d.out_dim = 2;
  d.weights.assign(dim, 0.0);
  d.weights.insert(d.weights.end(), w.begin(), w.end());
  d.bias = {0.0, b};
  ModelSpec model({d}, dim, 2);
  const double margin = std::abs(wx + b) / w1;
  return LinearCase{std::move(model), Tensor(std::move(x)), sign > 0 ? 1u : 0u, margin, std::move(w), b};
}

ModelSpec random_mlp(const std::vector<std::size_t>& dims, std::mt19937_64& rng) {
  if (dims.size() < 2) throw ContractError("random_mlp needs at least input and output dims");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    DenseLayer d;
    d.in_dim = dims[i];
    d.out_dim = dims[i + 1];
    const double scale = std::sqrt(2.0 / static_cast<double>(d.in_dim));
    d.weights.resize(d.in_dim * d.out_dim);
    for (auto& v : d.weights) v = scale * normal(rng);
    d.bias.resize(d.out_dim);
    for (auto& v : d.bias) v = 0.1 * normal(rng);
    layers.emplace_back(std::move(d));
    if (i + 2 < dims.size()) layers.emplace_back(ReluLayer{});
  }
  return ModelSpec(std::move(layers), dims.front(), dims.back());
}

Dataset make_moons(std::size_t n, double noise, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ut(0.0, std::numbers::pi);
  std::normal_distribution<double> jitter(0.0, noise);
  Dataset data;
  data.input_dim = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    const double t = ut(rng);
    double px = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double py = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    px += jitter(rng);
    py += jitter(rng);
    // Raw range is roughly [-1.3, 2.3] x [-0.8, 1.3].
    const double fx = std::clamp((px + 1.5) / 4.0, 0.0, 1.0);
    const double fy = std::clamp((py + 1.0) / 2.5, 0.0, 1.0);
    data.samples.push_back({Tensor(std::vector<double>{fx, fy}), label});
  }
  return data;
}

double clean_accuracy(const ModelSpec& model, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::size_t ok = 0;
  for (const auto& s : data.samples) ok += predict(model, s.x) == s.label ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

namespace {

// Cross-entropy gradients w.r.t. every Dense parameter, accumulated into
// `grads` (same layout as the model's dense layers).
void accumulate_param_grads(const std::vector<LayerSpec>& layers, const std::vector<double>& x, std::size_t y,
                            std::vector<DenseLayer>& grads) {
  std::vector<std::vector<double>> acts{x};
  for (const auto& layer : layers) {
    const auto& in = acts.back();
    std::vector<double> out;
    if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      out.assign(d->out_dim, 0.0);
      for (std::size_t r = 0; r < d->out_dim; ++r) {
        double s = d->bias[r];
        for (std::size_t c = 0; c < d->in_dim; ++c) s += d->weights[r * d->in_dim + c] * in[c];
        out[r] = s;
      }
    } else {
      out = in;
      for (auto& v : out) v = std::max(v, 0.0);
    }
    acts.push_back(std::move(out));
  }
  // d(standard CE)/dz = softmax - onehot, the negative of the attack-loss gradient.
  std::vector<double> up = loss_grad_logits(LossKind::CE, acts.back(), y);
  for (auto& v : up) v = -v;

  std::size_t dense_idx = grads.size();
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (const auto* d = std::get_if<DenseLayer>(&layers[i])) {
      auto& g = grads[--dense_idx];
      const auto& in = acts[i];
      std::vector<double> next(d->in_dim, 0.0);
      for (std::size_t r = 0; r < d->out_dim; ++r) {
        g.bias[r] += up[r];
        for (std::size_t c = 0; c < d->in_dim; ++c) {
          g.weights[r * d->in_dim + c] += up[r] * in[c];
          next[c] += d->weights[r * d->in_dim + c] * up[r];
        }
      }
      up.swap(next);
    } else {
      for (std::size_t c = 0; c < up.size(); ++c) {
        if (!(acts[i][c] > 0.0)) up[c] = 0.0;
      }
    }
  }
}

// l-inf PGD maximizing cross-entropy, random start inside the ball.
Tensor pgd_perturb(const ModelSpec& model, const Sample& s, const TrainOptions& opts, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-opts.adv_epsilon, opts.adv_epsilon);
  std::vector<double> x = s.x.data();
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(s.x[i] + u(rng), 0.0, 1.0);
  const double step = 2.5 * opts.adv_epsilon / static_cast<double>(std::max<std::size_t>(opts.adv_steps, 1));
  for (std::size_t k = 0; k < opts.adv_steps; ++k) {
    const auto ig = input_gradient(model, Tensor(x), s.label, LossKind::CE);
    for (std::size_t i = 0; i < x.size(); ++i) {
      // Descending log p_y ascends the standard cross-entropy.
      const double g = ig.grad[i];
      const double dir = g > 0.0 ? -1.0 : (g < 0.0 ? 1.0 : 0.0);
      const double lo = std::max(0.0, s.x[i] - opts.adv_epsilon);
      const double hi = std::min(1.0, s.x[i] + opts.adv_epsilon);
      x[i] = std::clamp(x[i] + step * dir, lo, hi);
    }
  }
  return Tensor(std::move(x));
}

}  // namespace

ModelSpec adversarial_train(const ModelSpec& model, const Dataset& data, const TrainOptions& opts,
                            std::mt19937_64& rng) {
  std::vector<LayerSpec> layers = model.layers();
  std::vector<DenseLayer> velocity;
  for (const auto& l : layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      DenseLayer v = *d;
      std::fill(v.weights.begin(), v.weights.end(), 0.0);
      std::fill(v.bias.begin(), v.bias.end(), 0.0);
      velocity.push_back(std::move(v));
    }
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    // Cosine-decayed learning rate.
    const double lr = opts.learning_rate * 0.5 *
                      (1.0 + std::cos(std::numbers::pi * static_cast<double>(epoch) / static_cast<double>(opts.epochs)));
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const ModelSpec current(layers, model.input_dim(), model.num_classes());
      std::vector<DenseLayer> grads = velocity;
      for (auto& g : grads) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = data.samples[order[i]];
        const Tensor adv = opts.adv_steps > 0 ? pgd_perturb(current, s, opts, rng) : s.x;
        accumulate_param_grads(layers, adv.data(), s.label, grads);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      std::size_t di = 0;
      for (auto& l : layers) {
        auto* d = std::get_if<DenseLayer>(&l);
        if (d == nullptr) continue;
        auto& v = velocity[di];
        const auto& g = grads[di];
        ++di;
        for (std::size_t j = 0; j < d->weights.size(); ++j) {
          v.weights[j] = opts.momentum * v.weights[j] + g.weights[j] * scale;
          d->weights[j] -= lr * v.weights[j];
        }
        for (std::size_t j = 0; j < d->bias.size(); ++j) {
          v.bias[j] = opts.momentum * v.bias[j] + g.bias[j] * scale;
          d->bias[j] -= lr * v.bias[j];
        }
      }
    }
  }
  return ModelSpec(std::move(layers), model.input_dim(), model.num_classes());
}

MlpFixture make_mlp_fixture(std::uint64_t seed, std::size_t tune_size, std::size_t eval_size) {
  std::mt19937_64 rng(seed);
  Dataset train = make_moons(1000, 0.08, rng);
  Dataset tune = make_moons(tune_size, 0.08, rng);
  Dataset eval = make_moons(eval_size, 0.08, rng);
  const ModelSpec init = random_mlp({2, 64, 64, 2}, rng);
  TrainOptions opts;
  ModelSpec trained = adversarial_train(init, train, opts, rng);
  return MlpFixture{std::move(trained), std::move(train), std::move(tune), std::move(eval)};
}

}  // namespace fmn::fixtures

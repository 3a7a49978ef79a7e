#pragma once

#include <cstdint>
#include <random>

#include "fmn/dataset.hpp"
#include "fmn/model.hpp"

namespace fmn::fixtures {

/// Binary linear classifier with logits (0, w.x + b) and a sample whose
/// minimal l-inf distance to the boundary is |w.x + b| / ||w||_1.
struct LinearCase {
  ModelSpec model;
  Tensor x;
  std::size_t label = 0;
  double distance = 0.0;
  std::vector<double> w;
  double b = 0.0;
};

/// x is drawn in [0.2, 0.8]^dim and the distance in [0.02, 0.1], so the
/// [0,1] box never binds at the optimum.
LinearCase make_linear_case(std::size_t dim, std::mt19937_64& rng);

/// Random Dense/ReLU network with He-scaled weights, e.g. dims {2, 16, 3}.
ModelSpec random_mlp(const std::vector<std::size_t>& dims, std::mt19937_64& rng);

/// Two interleaved half-moons scaled into [0,1]^2 with Gaussian jitter.
Dataset make_moons(std::size_t n, double noise, std::mt19937_64& rng);

struct TrainOptions {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double adv_epsilon = 0.04;  // l-inf radius of the training perturbations
  std::size_t adv_steps = 3;
};

/// Trains `model` on PGD-perturbed copies of `data` with cross-entropy.
ModelSpec adversarial_train(const ModelSpec& model, const Dataset& data, const TrainOptions& opts,
                            std::mt19937_64& rng);

double clean_accuracy(const ModelSpec& model, const Dataset& data);

/// The 2-64-64-2 adversarially trained MLP plus its train/tune/eval splits.
struct MlpFixture {
  ModelSpec model;
  Dataset train;
  Dataset tune;
  Dataset eval;
};

MlpFixture make_mlp_fixture(std::uint64_t seed, std::size_t tune_size = 100, std::size_t eval_size = 200);

}  // namespace fmn::fixtures

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "fmn/losses.hpp"
#include "fmn/tensor.hpp"

namespace fmn {

/// Fully-connected layer, y = W x + b, with W stored row-major [out x in].
struct DenseLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ReluLayer {
  friend bool operator==(const ReluLayer&, const ReluLayer&) = default;
};

using LayerSpec = std::variant<DenseLayer, ReluLayer>;

/// Immutable feedforward classifier producing raw logits.
///
/// The constructor checks that Dense dimensions chain from `input_dim` to
/// `num_classes`; once built the model can be shared freely across threads.
class ModelSpec {
 public:
  ModelSpec(std::vector<LayerSpec> layers, std::size_t input_dim, std::size_t num_classes);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

 private:
  std::vector<LayerSpec> layers_;
  std::size_t input_dim_;
  std::size_t num_classes_;
};

Tensor forward(const ModelSpec& model, const Tensor& x);

/// argmax of the logits, lowest index on ties.
std::size_t predict(const ModelSpec& model, const Tensor& x);
std::size_t argmax(std::span<const double> values);

struct InputGradient {
  double value = 0.0;          // attack loss at x
  Tensor grad;                 // dL/dx
  std::vector<double> logits;  // f(x), kept so callers need not re-run forward
};

/// Loss and its exact reverse-mode gradient w.r.t. the input. ReLU uses
/// subgradient 0 at a pre-activation of exactly 0.
InputGradient input_gradient(const ModelSpec& model, const Tensor& x, std::size_t y, LossKind loss);

// Model file: JSON document with `input_dim`, `num_classes` and
// `layers[] = {kind: "dense", weights: [[...]], bias: [...]} | {kind: "relu"}`.
ModelSpec model_from_json_text(const std::string& text);
std::string model_to_json_text(const ModelSpec& model);
ModelSpec load_model(const std::filesystem::path& path);
void save_model(const ModelSpec& model, const std::filesystem::path& path);

}  // namespace fmn

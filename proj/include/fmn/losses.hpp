#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "fmn/tensor.hpp"

namespace fmn {

class ModelSpec;

// The attack always minimizes the loss.
//   LL: z_y - max_{j != y} z_j   (negative iff misclassified)
//   CE: log softmax(z)_y         (minimizing drives p_y -> 0)
enum class LossKind { LL, CE };

std::string_view to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view name);

/// Index of the largest logit other than `y`; ties go to the lowest index.
std::size_t runner_up(std::span<const double> logits, std::size_t y);

double loss_value(LossKind kind, std::span<const double> logits, std::size_t y);

/// dL/dz. LL: +1 at y, -1 at the runner-up. CE: onehot(y) - softmax(z).
std::vector<double> loss_grad_logits(LossKind kind, std::span<const double> logits, std::size_t y);

bool is_adversarial(const ModelSpec& model, const Tensor& x_adv, std::size_t y);

}  // namespace fmn

#pragma once

#include <span>

#include "voxclick/diff/tensor.hpp"

namespace voxclick::sim {

inline constexpr double kDiceSmoothing = 1.0;

// 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps) with p = sigmoid(logits).
// logits is n x 1; target holds one 0/1 entry per row.
template <typename T>
diff::Tensor<T> dice_loss(const diff::Tensor<T>& logits, std::span<const std::uint8_t> target,
                          double smoothing = kDiceSmoothing);

// Mean binary cross-entropy of sigmoid(logits) against target, computed in
// the log-sum-exp stable form.
template <typename T>
diff::Tensor<T> bce_with_logits(const diff::Tensor<T>& logits, std::span<const std::uint8_t> target);

}  // namespace voxclick::sim

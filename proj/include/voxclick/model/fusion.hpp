#pragma once

#include <optional>
#include <span>
#include <vector>

#include "voxclick/diff/tensor.hpp"
#include "voxclick/grid/scene.hpp"
#include "voxclick/model/clicks.hpp"

namespace voxclick::model {

template <typename T>
struct FusionResult {
  // n_v x 1; positive evidence minus negative evidence (or positive evidence
  // alone when there is no negative side). mask = logits > 0.
  diff::Tensor<T> logits;
  grid::Mask mask;
};

// scene: n_v x d (after the output head). output_token / negative_token: 1 x d.
// Without a negative token: logit = scene . output, included iff logit > 0.
// With one: included iff scene . output > scene . negative (ties excluded).
template <typename T>
FusionResult<T> fuse_implicit(const diff::Tensor<T>& scene, const diff::Tensor<T>& output_token,
                              const std::optional<diff::Tensor<T>>& negative_token);

// Per-click logits L_i = scene . click_i. The positive side is the max over
// positive clicks, the negative side the max over negative clicks and learned
// negative tokens. Without any negative the positive max is compared to 0.
template <typename T>
FusionResult<T> fuse_explicit(const diff::Tensor<T>& scene, const diff::Tensor<T>& click_tokens,
                              std::span<const ClickLabel> labels,
                              const std::optional<diff::Tensor<T>>& learned_negative_tokens);

// Strict-comparison mask from already fused logits.
template <typename T>
grid::Mask positive_mask(const diff::Tensor<T>& logits);

}  // namespace voxclick::model

#include "voxclick/model/fusion.hpp"

#include "voxclick/diff/ops.hpp"

namespace voxclick::model {

using diff::Tensor;

template <typename T>
grid::Mask positive_mask(const Tensor<T>& logits) {
  grid::Mask m(logits.rows());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = logits.value()(static_cast<Eigen::Index>(i), 0) > T(0) ? 1 : 0;
  return m;
}

template <typename T>
FusionResult<T> fuse_implicit(const Tensor<T>& scene, const Tensor<T>& output_token,
                              const std::optional<Tensor<T>>& negative_token) {
  if (output_token.rows() != 1 || output_token.cols() != scene.cols()) {
    throw ContractViolation("fuse_implicit: output token must be 1 x d");
  }
  const Tensor<T> positive = diff::matmul_nt(scene, output_token);
  if (!negative_token) return {positive, positive_mask(positive)};
  if (negative_token->rows() != 1 || negative_token->cols() != scene.cols()) {
    throw ContractViolation("fuse_implicit: negative token must be 1 x d");
  }
  const Tensor<T> negative = diff::matmul_nt(scene, *negative_token);
  FusionResult<T> out;
  out.logits = diff::sub(positive, negative);
  out.mask.resize(scene.rows());
  for (std::size_t v = 0; v < out.mask.size(); ++v) {
    const auto r = static_cast<Eigen::Index>(v);
    out.mask[v] = positive.value()(r, 0) > negative.value()(r, 0) ? 1 : 0;
  }
  return out;
}

template <typename T>
FusionResult<T> fuse_explicit(const Tensor<T>& scene, const Tensor<T>& click_tokens, std::span<const ClickLabel> labels,
                              const std::optional<Tensor<T>>& learned_negative_tokens) {
  if (click_tokens.rows() != labels.size()) throw ContractViolation("fuse_explicit: one label per click token");
  std::vector<std::int32_t> pos_cols, neg_cols;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] == ClickLabel::kPositive ? pos_cols : neg_cols).push_back(static_cast<std::int32_t>(i));
  }
  if (pos_cols.empty()) throw InputError("explicit fusion needs at least one positive click");

  Tensor<T> tokens = click_tokens;
  if (learned_negative_tokens && learned_negative_tokens->rows() > 0) {
    const std::vector<Tensor<T>> parts{click_tokens, *learned_negative_tokens};
    tokens = diff::concat_rows<T>(parts);
    for (std::size_t j = 0; j < learned_negative_tokens->rows(); ++j) {
      neg_cols.push_back(static_cast<std::int32_t>(labels.size() + j));
    }
  }
  const Tensor<T> per_click = diff::matmul_nt(scene, tokens);
  const Tensor<T> positive = diff::rowwise_max<T>(per_click, pos_cols);
  if (neg_cols.empty()) return {positive, positive_mask(positive)};

  const Tensor<T> negative = diff::rowwise_max<T>(per_click, neg_cols);
  FusionResult<T> out;
  out.logits = diff::sub(positive, negative);
  out.mask.resize(scene.rows());
  for (std::size_t v = 0; v < out.mask.size(); ++v) {
    const auto r = static_cast<Eigen::Index>(v);
    out.mask[v] = positive.value()(r, 0) > negative.value()(r, 0) ? 1 : 0;
  }
  return out;
}

template grid::Mask positive_mask(const Tensor<float>&);
template grid::Mask positive_mask(const Tensor<double>&);
template FusionResult<float> fuse_implicit(const Tensor<float>&, const Tensor<float>&, const std::optional<Tensor<float>>&);
template FusionResult<double> fuse_implicit(const Tensor<double>&, const Tensor<double>&,
                                            const std::optional<Tensor<double>>&);
template FusionResult<float> fuse_explicit(const Tensor<float>&, const Tensor<float>&, std::span<const ClickLabel>,
                                           const std::optional<Tensor<float>>&);
template FusionResult<double> fuse_explicit(const Tensor<double>&, const Tensor<double>&, std::span<const ClickLabel>,
                                            const std::optional<Tensor<double>>&);

}  // namespace voxclick::model

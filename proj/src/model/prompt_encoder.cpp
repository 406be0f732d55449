#include "voxclick/model/prompt_encoder.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "voxclick/diff/ops.hpp"

namespace voxclick::model {

namespace {

std::atomic<bool> g_warned_degenerate{false};

}  // namespace

template <typename T>
PromptEncoder<T>::PromptEncoder(diff::ParameterSet<T>& params, int embed_dim, double sigma, bool with_labels,
                                diff::Rng& rng)
    : embed_dim_(embed_dim) {
  if (embed_dim <= 0 || embed_dim % 2 != 0) throw ConfigError("prompt encoder needs an even embed_dim");
  const auto d = static_cast<std::size_t>(embed_dim);
  frequencies_ = params.add("prompt_encoder.frequencies", diff::gaussian<T>(3, d / 2, sigma, rng), false);
  if (with_labels) {
    label_positive_ = params.add("prompt_encoder.positive", diff::gaussian<T>(1, d, 1.0, rng));
    label_negative_ = params.add("prompt_encoder.negative", diff::gaussian<T>(1, d, 1.0, rng));
  }
}

template <typename T>
diff::Matrix<T> PromptEncoder<T>::positional_encode(const grid::Vec3& position, const grid::Bounds& bounds) const {
  Eigen::Matrix<double, 1, 3> unit;
  for (int a = 0; a < 3; ++a) {
    const double extent = bounds.max[a] - bounds.min[a];
    if (extent > 0.0) {
      unit(a) = (position[a] - bounds.min[a]) / extent;
    } else {
      if (!g_warned_degenerate.exchange(true)) {
        spdlog::warn("degenerate scene extent on axis {}; positional encoding uses 0.5", a);
      }
      unit(a) = 0.5;
    }
  }
  const auto half = frequencies_.value().cols();
  diff::Matrix<T> out(1, 2 * half);
  const auto& b = frequencies_.value();
  for (Eigen::Index f = 0; f < half; ++f) {
    const double proj = 2.0 * std::numbers::pi *
                        (unit(0) * static_cast<double>(b(0, f)) + unit(1) * static_cast<double>(b(1, f)) +
                         unit(2) * static_cast<double>(b(2, f)));
    out(0, f) = static_cast<T>(std::sin(proj));
    out(0, half + f) = static_cast<T>(std::cos(proj));
  }
  return out;
}

template <typename T>
diff::Tensor<T> PromptEncoder<T>::positional_encode_many(std::span<const grid::Vec3> positions,
                                                         const grid::Bounds& bounds) const {
  diff::Matrix<T> out(static_cast<Eigen::Index>(positions.size()), embed_dim_);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = positional_encode(positions[i], bounds);
  }
  return diff::Tensor<T>::constant(std::move(out));
}

template <typename T>
PromptEmbedding<T> PromptEncoder<T>::encode_clicks(const ClickSet& clicks, const grid::Bounds& bounds) const {
  if (clicks.empty()) throw InputError("encode_clicks: empty click set");
  std::vector<grid::Vec3> positions;
  PromptEmbedding<T> out;
  for (const auto& c : clicks) {
    positions.push_back(c.position);
    out.labels.push_back(c.label);
  }
  diff::Tensor<T> pe = positional_encode_many(positions, bounds);
  if (!has_labels()) {
    out.rows = pe;
    return out;
  }
  std::vector<diff::Tensor<T>> label_rows;
  label_rows.reserve(clicks.size());
  for (const auto& c : clicks) label_rows.push_back(c.positive() ? label_positive_ : label_negative_);
  out.rows = diff::add(pe, diff::concat_rows<T>(label_rows));
  return out;
}

template class PromptEncoder<float>;
template class PromptEncoder<double>;

}  // namespace voxclick::model

#pragma once

#include <span>
#include <vector>

#include "voxclick/diff/parameters.hpp"
#include "voxclick/grid/scene.hpp"
#include "voxclick/model/clicks.hpp"

namespace voxclick::model {

template <typename T>
struct PromptEmbedding {
  diff::Tensor<T> rows;  // n_c x embed_dim: positional + label
  std::vector<ClickLabel> labels;
};

// Random Fourier positional encoding of 3-D positions relative to the scene
// extent, plus two learned label vectors. Registers under `prompt_encoder.`:
//   frequencies  3 x embed_dim/2, frozen Gaussian(0, sigma)
//   positive, negative  1 x embed_dim (only when with_labels)
template <typename T>
class PromptEncoder {
 public:
  PromptEncoder() = default;
  PromptEncoder(diff::ParameterSet<T>& params, int embed_dim, double sigma, bool with_labels, diff::Rng& rng);

  int embed_dim() const { return embed_dim_; }
  bool has_labels() const { return label_positive_.defined(); }

  // 1 x embed_dim; entries are sin/cos of 2*pi*(normalized position * B).
  diff::Matrix<T> positional_encode(const grid::Vec3& position, const grid::Bounds& bounds) const;
  diff::Tensor<T> positional_encode_many(std::span<const grid::Vec3> positions, const grid::Bounds& bounds) const;

  // Row i = PE(click i) + label embedding(click i). Without label embeddings
  // (explicit fusion) the rows are pure positional encodings.
  PromptEmbedding<T> encode_clicks(const ClickSet& clicks, const grid::Bounds& bounds) const;

 private:
  int embed_dim_ = 0;
  diff::Tensor<T> frequencies_;
  diff::Tensor<T> label_positive_;
  diff::Tensor<T> label_negative_;
};

}  // namespace voxclick::model

#pragma once

#include <vector>

#include "voxclick/diff/layers.hpp"
#include "voxclick/model/config.hpp"

namespace voxclick::model {

// Click-independent part of a decoder pass: the scene, its positional
// encoding and the first block's scene-side projections. Built once per
// scene and reused for every click set.
template <typename T>
struct PreparedScene {
  diff::Tensor<T> scene;
  diff::Tensor<T> scene_pe;
  diff::Tensor<T> keyed;           // scene + scene_pe
  diff::Tensor<T> first_keys;      // block 0 token->scene key projection
  diff::Tensor<T> first_values;    // block 0 token->scene value projection
  diff::Tensor<T> first_queries;   // block 0 scene->token query projection
};

template <typename T>
struct DecoderOutput {
  diff::Tensor<T> scene;   // updated scene embedding
  diff::Tensor<T> tokens;  // updated tokens, same order as given
};

// Two-way transformer. Per block: token self-attention, token->scene
// cross-attention, token MLP, scene->token cross-attention; each followed by a
// residual add and layer norm. Queries and keys get their positional
// encodings re-added at every attention. A final token->scene attention
// closes the stack.
template <typename T>
class TwoWayDecoder {
 public:
  TwoWayDecoder() = default;
  TwoWayDecoder(const DecoderConfig& config, int embed_dim, diff::ParameterSet<T>& params, diff::Rng& rng);

  PreparedScene<T> prepare(const diff::Tensor<T>& scene, const diff::Tensor<T>& scene_pe) const;

  DecoderOutput<T> decode(const PreparedScene<T>& scene, const diff::Tensor<T>& tokens,
                          const diff::Tensor<T>& token_pe) const;

  DecoderOutput<T> decode(const diff::Tensor<T>& scene, const diff::Tensor<T>& scene_pe,
                          const diff::Tensor<T>& tokens, const diff::Tensor<T>& token_pe) const {
    return decode(prepare(scene, scene_pe), tokens, token_pe);
  }

 private:
  struct Block {
    diff::MultiHeadAttention<T> self_attn;
    diff::MultiHeadAttention<T> token_to_scene;
    diff::MultiHeadAttention<T> scene_to_token;
    diff::Linear<T> mlp_in, mlp_out;
    diff::LayerNorm<T> norm1, norm2, norm3, norm4;
  };

  DecoderConfig config_;
  int embed_dim_ = 0;
  std::vector<Block> blocks_;
  diff::MultiHeadAttention<T> final_attn_;
  diff::LayerNorm<T> final_norm_;
};

}  // namespace voxclick::model

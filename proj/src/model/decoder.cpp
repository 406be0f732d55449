#include "voxclick/model/decoder.hpp"

namespace voxclick::model {

using diff::Tensor;

template <typename T>
TwoWayDecoder<T>::TwoWayDecoder(const DecoderConfig& config, int embed_dim, diff::ParameterSet<T>& params,
                                diff::Rng& rng)
    : config_(config), embed_dim_(embed_dim) {
  config_.validate(embed_dim);
  const auto d = static_cast<std::size_t>(embed_dim);
  const auto cross = d / static_cast<std::size_t>(config_.cross_attention_downsample);
  for (int b = 0; b < config_.blocks; ++b) {
    const std::string p = "decoder.block" + std::to_string(b);
    Block blk;
    blk.self_attn = diff::MultiHeadAttention<T>::create(params, p + ".self_attn", d, d, config_.heads, rng);
    blk.token_to_scene = diff::MultiHeadAttention<T>::create(params, p + ".token_to_scene", d, cross, config_.heads, rng);
    blk.scene_to_token = diff::MultiHeadAttention<T>::create(params, p + ".scene_to_token", d, cross, config_.heads, rng);
    blk.mlp_in = diff::Linear<T>::create(params, p + ".mlp_in", d, static_cast<std::size_t>(config_.mlp_dim), rng);
    blk.mlp_out = diff::Linear<T>::create(params, p + ".mlp_out", static_cast<std::size_t>(config_.mlp_dim), d, rng);
    blk.norm1 = diff::LayerNorm<T>::create(params, p + ".norm1", d);
    blk.norm2 = diff::LayerNorm<T>::create(params, p + ".norm2", d);
    blk.norm3 = diff::LayerNorm<T>::create(params, p + ".norm3", d);
    blk.norm4 = diff::LayerNorm<T>::create(params, p + ".norm4", d);
    blocks_.push_back(std::move(blk));
  }
  final_attn_ = diff::MultiHeadAttention<T>::create(params, "decoder.final_attn", d, cross, config_.heads, rng);
  final_norm_ = diff::LayerNorm<T>::create(params, "decoder.final_norm", d);
}

template <typename T>
PreparedScene<T> TwoWayDecoder<T>::prepare(const Tensor<T>& scene, const Tensor<T>& scene_pe) const {
  if (scene.shape() != scene_pe.shape() || scene.cols() != static_cast<std::size_t>(embed_dim_)) {
    throw ContractViolation("decoder: scene and scene positional encoding must both be n_v x embed_dim");
  }
  PreparedScene<T> p;
  p.scene = scene;
  p.scene_pe = scene_pe;
  p.keyed = diff::add(scene, scene_pe);
  const Block& first = blocks_.front();
  p.first_keys = first.token_to_scene.k_proj(p.keyed);
  p.first_values = first.token_to_scene.v_proj(scene);
  p.first_queries = first.scene_to_token.q_proj(p.keyed);
  return p;
}

template <typename T>
DecoderOutput<T> TwoWayDecoder<T>::decode(const PreparedScene<T>& prepared, const Tensor<T>& tokens_in,
                                          const Tensor<T>& token_pe) const {
  if (tokens_in.shape() != token_pe.shape() || tokens_in.cols() != static_cast<std::size_t>(embed_dim_)) {
    throw ContractViolation("decoder: tokens and token encodings must both be n_t x embed_dim");
  }
  Tensor<T> tokens = tokens_in;
  Tensor<T> scene = prepared.scene;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    Tensor<T> q = diff::add(tokens, token_pe);
    tokens = blk.norm1(diff::add(tokens, blk.self_attn(q, q, tokens)));

    q = diff::add(tokens, token_pe);
    const Tensor<T> keyed = b == 0 ? prepared.keyed : diff::add(scene, prepared.scene_pe);
    Tensor<T> attended;
    if (b == 0) {
      attended = blk.token_to_scene.with_projected(q, prepared.first_keys, prepared.first_values);
    } else {
      attended = blk.token_to_scene(q, keyed, scene);
    }
    tokens = blk.norm2(diff::add(tokens, attended));

    tokens = blk.norm3(diff::add(tokens, blk.mlp_out(diff::relu(blk.mlp_in(tokens)))));

    q = diff::add(tokens, token_pe);
    const auto& s2t = blk.scene_to_token;
    const Tensor<T> scene_q = b == 0 ? prepared.first_queries : s2t.q_proj(keyed);
    Tensor<T> to_scene = s2t.out_proj(diff::attention(scene_q, s2t.k_proj(q), s2t.v_proj(tokens), s2t.heads));
    scene = blk.norm4(diff::add(scene, to_scene));
  }
  const Tensor<T> q = diff::add(tokens, token_pe);
  const Tensor<T> keyed = diff::add(scene, prepared.scene_pe);
  tokens = final_norm_(diff::add(tokens, final_attn_(q, keyed, scene)));
  return {scene, tokens};
}

template class TwoWayDecoder<float>;
template class TwoWayDecoder<double>;

}  // namespace voxclick::model

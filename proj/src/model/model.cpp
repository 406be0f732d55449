#include "voxclick/model/model.hpp"

#include "voxclick/diff/ops.hpp"

namespace voxclick::model {

using diff::Tensor;

template <typename T>
Model<T>::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  diff::Rng rng(config_.seed);
  const int d = config_.embed_dim();
  const auto du = static_cast<std::size_t>(d);
  encoder_ = SceneEncoder<T>(config_.unet, params_, rng);
  const bool implicit = config_.fusion.mode == FusionMode::kImplicit;
  prompt_ = PromptEncoder<T>(params_, d, config_.prompt.fourier_sigma, implicit, rng);
  decoder_ = TwoWayDecoder<T>(config_.decoder, d, params_, rng);
  output_head_ = diff::Linear<T>::create(params_, "decoder.output_head", du, du, rng);
  if (implicit) {
    output_token_ = params_.add("decoder.learned.output", diff::gaussian<T>(1, du, 1.0, rng));
    if (config_.fusion.use_negative_embedding) {
      negative_output_token_ = params_.add("decoder.learned.negative_output", diff::gaussian<T>(1, du, 1.0, rng));
    }
  } else if (config_.fusion.learned_negative_tokens() > 0) {
    explicit_negatives_ = params_.add(
        "decoder.learned.negatives",
        diff::gaussian<T>(static_cast<std::size_t>(config_.fusion.learned_negative_tokens()), du, 1.0, rng));
  }
}

template <typename T>
Model<T> Model<T>::from_checkpoint(const diff::Checkpoint& ckpt) {
  if (!ckpt.config.contains("model")) throw FormatError("checkpoint has no model config");
  Model m(ckpt.config.at("model").get<ModelConfig>());
  diff::restore(m.params_, ckpt);
  return m;
}

template <typename T>
Model<T> Model<T>::load(const std::filesystem::path& path) {
  return from_checkpoint(diff::load_checkpoint(path));
}

template <typename T>
diff::Checkpoint Model<T>::checkpoint() const {
  nlohmann::json cfg;
  cfg["model"] = config_;
  return diff::snapshot(params_, cfg);
}

template <typename T>
void Model<T>::save(const std::filesystem::path& path) const {
  diff::save_checkpoint(checkpoint(), path);
}

template <typename T>
SceneContext<T> Model<T>::prepare(const grid::VoxelScene& scene, const grid::Bounds& bounds) const {
  SceneContext<T> ctx;
  ctx.embedding = encoder_.encode(scene, bounds);
  std::vector<grid::Vec3> centers(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) centers[i] = scene.center(i);
  const Tensor<T> scene_pe = prompt_.positional_encode_many(centers, bounds);
  ctx.prepared = decoder_.prepare(ctx.embedding.features, scene_pe);
  return ctx;
}

template <typename T>
Prediction<T> Model<T>::predict(const SceneContext<T>& ctx, const ClickSet& clicks) const {
  const PromptEmbedding<T> prompt = prompt_.encode_clicks(clicks, ctx.embedding.bounds);
  const std::size_t k = clicks.size();
  std::vector<Tensor<T>> parts{prompt.rows};
  const bool implicit = config_.fusion.mode == FusionMode::kImplicit;
  if (implicit) {
    parts.push_back(output_token_);
    if (negative_output_token_) parts.push_back(*negative_output_token_);
  } else if (explicit_negatives_) {
    parts.push_back(*explicit_negatives_);
  }
  const Tensor<T> tokens = diff::concat_rows<T>(parts);

  Prediction<T> out;
  out.decoded = decoder_.decode(ctx.prepared, tokens, tokens);
  const Tensor<T> scene = output_head_(out.decoded.scene);
  if (implicit) {
    std::optional<Tensor<T>> negative;
    if (negative_output_token_) negative = diff::slice_rows(out.decoded.tokens, k + 1, 1);
    out.fused = fuse_implicit(scene, diff::slice_rows(out.decoded.tokens, k, 1), negative);
  } else {
    std::optional<Tensor<T>> learned;
    if (explicit_negatives_) learned = diff::slice_rows(out.decoded.tokens, k, explicit_negatives_->rows());
    out.fused = fuse_explicit(scene, diff::slice_rows(out.decoded.tokens, 0, k), prompt.labels, learned);
  }
  return out;
}

template class Model<float>;
template class Model<double>;

}  // namespace voxclick::model

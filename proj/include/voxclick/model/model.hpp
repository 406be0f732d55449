#pragma once

#include <filesystem>
#include <optional>

#include "voxclick/diff/checkpoint.hpp"
#include "voxclick/model/config.hpp"
#include "voxclick/model/decoder.hpp"
#include "voxclick/model/fusion.hpp"
#include "voxclick/model/prompt_encoder.hpp"
#include "voxclick/model/scene_encoder.hpp"

namespace voxclick::model {

// Everything about a scene that does not depend on the clicks.
template <typename T>
struct SceneContext {
  SceneEmbedding<T> embedding;
  PreparedScene<T> prepared;
};

template <typename T>
struct Prediction {
  FusionResult<T> fused;
  DecoderOutput<T> decoded;
};

// Scene encoder + prompt encoder + two-way decoder + fusion. Weights are
// shared by handle, so a Model is move-only.
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  static Model from_checkpoint(const diff::Checkpoint& ckpt);
  static Model load(const std::filesystem::path& path);
  diff::Checkpoint checkpoint() const;
  void save(const std::filesystem::path& path) const;

  // Encoder pass; run once per scene.
  SceneContext<T> prepare(const grid::VoxelScene& scene, const grid::Bounds& bounds) const;
  // Decoder + fusion for one click set.
  Prediction<T> predict(const SceneContext<T>& context, const ClickSet& clicks) const;

  const ModelConfig& config() const { return config_; }
  diff::ParameterSet<T>& parameters() { return params_; }
  const diff::ParameterSet<T>& parameters() const { return params_; }
  const PromptEncoder<T>& prompt_encoder() const { return prompt_; }
  const SceneEncoder<T>& scene_encoder() const { return encoder_; }
  const TwoWayDecoder<T>& decoder() const { return decoder_; }

 private:
  ModelConfig config_;
  diff::ParameterSet<T> params_;
  SceneEncoder<T> encoder_;
  PromptEncoder<T> prompt_;
  TwoWayDecoder<T> decoder_;
  diff::Linear<T> output_head_;
  diff::Tensor<T> output_token_;
  std::optional<diff::Tensor<T>> negative_output_token_;
  std::optional<diff::Tensor<T>> explicit_negatives_;
};

}  // namespace voxclick::model

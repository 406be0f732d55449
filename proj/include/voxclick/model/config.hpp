#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace voxclick::model {

struct UNetConfig {
  int levels = 3;
  int base_channels = 16;
  int embed_dim = 64;
  int input_channels = 4;  // rgb + occupancy
  int kernel_extent = 3;

  void validate() const;
};

struct PromptConfig {
  double fourier_sigma = 1.0;
  int max_clicks = 10;
};

struct DecoderConfig {
  int blocks = 2;
  int heads = 8;
  int mlp_dim = 1024;
  // Cross-attention runs at embed_dim / downsample internal width.
  int cross_attention_downsample = 2;

  void validate(int embed_dim) const;
};

enum class FusionMode { kExplicit, kImplicit };

struct FusionConfig {
  FusionMode mode = FusionMode::kImplicit;
  bool use_negative_embedding = true;
  int explicit_negative_count = 1;

  void validate() const;
  // Learned negative tokens actually fed to the decoder.
  int learned_negative_tokens() const;
};

std::string to_string(FusionMode mode);
FusionMode fusion_mode_from_string(const std::string& s);

struct ModelConfig {
  UNetConfig unet;
  PromptConfig prompt;
  DecoderConfig decoder;
  FusionConfig fusion;
  double voxel_size = 0.05;
  std::uint64_t seed = 0;

  int embed_dim() const { return unet.embed_dim; }
  void validate() const;

  // Desk-scale preset: full-size heads, narrower MLP.
  static ModelConfig desk();
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace voxclick::model

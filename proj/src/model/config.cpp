#include "voxclick/model/config.hpp"

#include "voxclick/errors.hpp"

namespace voxclick::model {

void UNetConfig::validate() const {
  if (levels < 1) throw ConfigError("unet.levels must be >= 1");
  if (base_channels <= 0 || embed_dim <= 0 || input_channels <= 0) throw ConfigError("unet widths must be positive");
  if (kernel_extent <= 0 || kernel_extent % 2 == 0) throw ConfigError("unet.kernel_extent must be odd");
}

void DecoderConfig::validate(int embed_dim) const {
  if (blocks < 1) throw ConfigError("decoder.blocks must be >= 1");
  if (heads <= 0 || embed_dim % heads != 0) throw ConfigError("decoder.heads must divide embed_dim");
  if (cross_attention_downsample <= 0 || embed_dim % cross_attention_downsample != 0 ||
      (embed_dim / cross_attention_downsample) % heads != 0) {
    throw ConfigError("decoder cross-attention width must be divisible by heads");
  }
  if (mlp_dim <= 0) throw ConfigError("decoder.mlp_dim must be positive");
}

void FusionConfig::validate() const {
  if (explicit_negative_count < 0) throw ConfigError("fusion.explicit_negative_count must be >= 0");
}

int FusionConfig::learned_negative_tokens() const {
  if (!use_negative_embedding) return 0;
  return mode == FusionMode::kImplicit ? 1 : explicit_negative_count;
}

std::string to_string(FusionMode mode) { return mode == FusionMode::kImplicit ? "implicit" : "explicit"; }

FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "implicit") return FusionMode::kImplicit;
  if (s == "explicit") return FusionMode::kExplicit;
  throw ConfigError("unknown fusion mode '" + s + "'");
}

void ModelConfig::validate() const {
  unet.validate();
  decoder.validate(unet.embed_dim);
  fusion.validate();
  if (unet.embed_dim % 2 != 0) throw ConfigError("embed_dim must be even for sin/cos encodings");
  if (prompt.max_clicks < 1) throw ConfigError("prompt.max_clicks must be >= 1");
  if (!(voxel_size > 0.0)) throw ConfigError("voxel_size must be > 0");
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.decoder.mlp_dim = 256;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {
      {"unet",
       {{"levels", c.unet.levels},
        {"base_channels", c.unet.base_channels},
        {"embed_dim", c.unet.embed_dim},
        {"input_channels", c.unet.input_channels},
        {"kernel_extent", c.unet.kernel_extent}}},
      {"prompt", {{"fourier_sigma", c.prompt.fourier_sigma}, {"max_clicks", c.prompt.max_clicks}}},
      {"decoder",
       {{"blocks", c.decoder.blocks},
        {"heads", c.decoder.heads},
        {"mlp_dim", c.decoder.mlp_dim},
        {"cross_attention_downsample", c.decoder.cross_attention_downsample}}},
      {"fusion",
       {{"mode", to_string(c.fusion.mode)},
        {"use_negative_embedding", c.fusion.use_negative_embedding},
        {"explicit_negative_count", c.fusion.explicit_negative_count}}},
      {"voxel_size", c.voxel_size},
      {"seed", c.seed},
  };
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  if (j.contains("unet")) {
    const auto& u = j.at("unet");
    c.unet.levels = u.value("levels", c.unet.levels);
    c.unet.base_channels = u.value("base_channels", c.unet.base_channels);
    c.unet.embed_dim = u.value("embed_dim", c.unet.embed_dim);
    c.unet.input_channels = u.value("input_channels", c.unet.input_channels);
    c.unet.kernel_extent = u.value("kernel_extent", c.unet.kernel_extent);
  }
  if (j.contains("prompt")) {
    const auto& p = j.at("prompt");
    c.prompt.fourier_sigma = p.value("fourier_sigma", c.prompt.fourier_sigma);
    c.prompt.max_clicks = p.value("max_clicks", c.prompt.max_clicks);
  }
  if (j.contains("decoder")) {
    const auto& d = j.at("decoder");
    c.decoder.blocks = d.value("blocks", c.decoder.blocks);
    c.decoder.heads = d.value("heads", c.decoder.heads);
    c.decoder.mlp_dim = d.value("mlp_dim", c.decoder.mlp_dim);
    c.decoder.cross_attention_downsample = d.value("cross_attention_downsample", c.decoder.cross_attention_downsample);
  }
  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    c.fusion.mode = fusion_mode_from_string(f.value("mode", std::string("implicit")));
    c.fusion.use_negative_embedding = f.value("use_negative_embedding", c.fusion.use_negative_embedding);
    c.fusion.explicit_negative_count = f.value("explicit_negative_count", c.fusion.explicit_negative_count);
  }
  c.voxel_size = j.value("voxel_size", c.voxel_size);
  c.seed = j.value("seed", c.seed);
}

}  // namespace voxclick::model

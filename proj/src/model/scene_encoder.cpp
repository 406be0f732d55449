#include "voxclick/model/scene_encoder.hpp"

#include <algorithm>

namespace voxclick::model {

using diff::Tensor;

template <typename T>
SceneEncoder<T>::SceneEncoder(const UNetConfig& config, diff::ParameterSet<T>& params, diff::Rng& rng)
    : config_(config) {
  config_.validate();
  const int k = config_.kernel_extent;
  const int volume = k * k * k;
  auto width = [&](int level) { return config_.base_channels << level; };

  stem_ = make_conv(params, "scene_encoder.stem", volume, config_.input_channels, width(0), rng);
  for (int l = 0; l < config_.levels; ++l) {
    encoder_blocks_.push_back(
        make_conv(params, "scene_encoder.enc" + std::to_string(l), volume, width(l), width(l), rng));
  }
  for (int l = 0; l + 1 < config_.levels; ++l) {
    down_.push_back(make_conv(params, "scene_encoder.down" + std::to_string(l), 8, width(l), width(l + 1), rng));
    up_.push_back(make_conv(params, "scene_encoder.up" + std::to_string(l), 8, width(l + 1), width(l), rng));
    decoder_blocks_.push_back(
        make_conv(params, "scene_encoder.dec" + std::to_string(l), volume, 2 * width(l), width(l), rng));
  }
  head_ = diff::Linear<T>::create(params, "scene_encoder.head", static_cast<std::size_t>(width(0)),
                                  static_cast<std::size_t>(config_.embed_dim), rng);
}

template <typename T>
typename SceneEncoder<T>::ConvNorm SceneEncoder<T>::make_conv(diff::ParameterSet<T>& params, const std::string& name,
                                                              int volume, int in, int out, diff::Rng& rng) {
  ConvNorm layer;
  const auto fan_in = static_cast<std::size_t>(volume * in);
  layer.weights = params.add(name + ".kernel", diff::uniform_fan_in<T>(fan_in, static_cast<std::size_t>(out), fan_in, rng));
  layer.norm = diff::LayerNorm<T>::create(params, name + ".norm", static_cast<std::size_t>(out));
  return layer;
}

template <typename T>
Tensor<T> SceneEncoder<T>::apply(const ConvNorm& layer, const Tensor<T>& x,
                                 const std::shared_ptr<const diff::Rulebook>& rules) const {
  return diff::relu(layer.norm(diff::sparse_conv(x, rules, layer.weights)));
}

template <typename T>
grid::Bounds SceneEncoder<T>::voxel_bounds(const grid::VoxelScene& scene) {
  if (scene.coords.empty()) throw InputError("voxel scene is empty");
  grid::Coord hi = scene.coords.front();
  for (const auto& c : scene.coords) {
    hi.x = std::max(hi.x, c.x);
    hi.y = std::max(hi.y, c.y);
    hi.z = std::max(hi.z, c.z);
  }
  grid::Bounds b;
  b.min = scene.origin;
  b.max = {scene.origin[0] + (hi.x + 1) * scene.resolution_m, scene.origin[1] + (hi.y + 1) * scene.resolution_m,
           scene.origin[2] + (hi.z + 1) * scene.resolution_m};
  return b;
}

template <typename T>
SceneEmbedding<T> SceneEncoder<T>::encode(const grid::VoxelScene& scene, const grid::Bounds& bounds) const {
  if (scene.size() == 0) throw InputError("encode_scene: empty voxel scene");
  const auto n = static_cast<Eigen::Index>(scene.size());
  diff::Matrix<T> input(n, config_.input_channels);
  input.setZero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = scene.colors[static_cast<std::size_t>(i)];
    for (int a = 0; a < 3 && a < config_.input_channels; ++a) input(i, a) = static_cast<T>(c[static_cast<std::size_t>(a)]);
    if (config_.input_channels > 3) input(i, 3) = T(1);
  }

  const std::array<int, 3> extent{config_.kernel_extent, config_.kernel_extent, config_.kernel_extent};
  // Per-level coordinates and rulebooks.
  std::vector<std::vector<grid::Coord>> coords{scene.coords};
  std::vector<std::shared_ptr<const diff::Rulebook>> subm;
  std::vector<std::shared_ptr<const diff::Rulebook>> down, up;
  subm.push_back(std::make_shared<const diff::Rulebook>(diff::submanifold_rules(coords[0], extent)));
  for (int l = 0; l + 1 < config_.levels; ++l) {
    diff::Downsampled ds = diff::downsample_rules(coords[static_cast<std::size_t>(l)]);
    up.push_back(std::make_shared<const diff::Rulebook>(diff::transpose_rules(ds.rules)));
    down.push_back(std::make_shared<const diff::Rulebook>(std::move(ds.rules)));
    coords.push_back(std::move(ds.coords));
    subm.push_back(std::make_shared<const diff::Rulebook>(diff::submanifold_rules(coords.back(), extent)));
  }

  Tensor<T> x = apply(stem_, Tensor<T>::constant(std::move(input)), subm[0]);
  std::vector<Tensor<T>> skips;
  for (int l = 0; l < config_.levels; ++l) {
    const auto L = static_cast<std::size_t>(l);
    x = diff::add(x, apply(encoder_blocks_[L], x, subm[L]));
    skips.push_back(x);
    if (l + 1 < config_.levels) x = apply(down_[L], x, down[L]);
  }
  for (int l = config_.levels - 2; l >= 0; --l) {
    const auto L = static_cast<std::size_t>(l);
    Tensor<T> upsampled = apply(up_[L], x, up[L]);
    x = apply(decoder_blocks_[L], diff::concat_cols(upsampled, skips[L]), subm[L]);
  }

  SceneEmbedding<T> out;
  out.features = head_(x);
  out.coords = scene.coords;
  out.bounds = bounds;
  return out;
}

template class SceneEncoder<float>;
template class SceneEncoder<double>;

}  // namespace voxclick::model

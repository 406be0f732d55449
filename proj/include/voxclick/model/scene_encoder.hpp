#pragma once

#include <memory>
#include <vector>

#include "voxclick/diff/layers.hpp"
#include "voxclick/diff/sparse_conv.hpp"
#include "voxclick/grid/scene.hpp"
#include "voxclick/model/config.hpp"

namespace voxclick::model {

template <typename T>
struct SceneEmbedding {
  diff::Tensor<T> features;  // n_v x embed_dim, rows in VoxelScene order
  std::vector<grid::Coord> coords;
  grid::Bounds bounds;
};

// Sparse U-Net: submanifold convolutions at every level, stride-2 kernel-2
// convolutions between levels, transposed counterparts with skip
// concatenation on the way up, then a linear layer to embed_dim. Each
// convolution is followed by per-voxel layer norm and ReLU.
template <typename T>
class SceneEncoder {
 public:
  SceneEncoder() = default;
  SceneEncoder(const UNetConfig& config, diff::ParameterSet<T>& params, diff::Rng& rng);

  // Input per voxel: mean color and a constant occupancy channel.
  SceneEmbedding<T> encode(const grid::VoxelScene& scene, const grid::Bounds& bounds) const;

  // Bounds derived from the voxel grid when the point cloud is not at hand.
  static grid::Bounds voxel_bounds(const grid::VoxelScene& scene);

 private:
  struct ConvNorm {
    diff::Tensor<T> weights;
    diff::LayerNorm<T> norm;
  };

  ConvNorm make_conv(diff::ParameterSet<T>& params, const std::string& name, int volume, int in, int out,
                     diff::Rng& rng);
  diff::Tensor<T> apply(const ConvNorm& layer, const diff::Tensor<T>& x,
                        const std::shared_ptr<const diff::Rulebook>& rules) const;

  UNetConfig config_;
  ConvNorm stem_;
  std::vector<ConvNorm> encoder_blocks_;  // one per level
  std::vector<ConvNorm> down_;            // levels - 1
  std::vector<ConvNorm> up_;              // levels - 1, index = target level
  std::vector<ConvNorm> decoder_blocks_;  // levels - 1, index = level
  diff::Linear<T> head_;
};

}  // namespace voxclick::model

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "voxclick/diff/sparse_conv.hpp"

namespace voxclick::grid {

using Vec3 = std::array<double, 3>;
using Coord = diff::Coord;
// One byte per element, 0 or 1.
using Mask = std::vector<std::uint8_t>;

inline constexpr double kDefaultVoxelSize = 0.05;

// Colored point cloud, optionally with per-point instance ids (0 = background).
struct PointScene {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;  // each channel in [0, 1]
  std::optional<std::vector<std::uint32_t>> instance_labels;

  std::size_t size() const { return positions.size(); }
  bool has_labels() const { return instance_labels.has_value(); }

  // Throws InputError on empty scenes, non-finite positions, out-of-range
  // colors or a label array of the wrong length.
  void validate() const;
};

struct Bounds {
  Vec3 min{0, 0, 0};
  Vec3 max{0, 0, 0};
};

Bounds scene_bounds(std::span<const Vec3> positions);

struct VoxelScene {
  std::vector<Coord> coords;  // unique, lexicographically sorted
  std::vector<Vec3> colors;   // mean color of member points
  double resolution_m = kDefaultVoxelSize;
  Vec3 origin{0, 0, 0};

  std::size_t size() const { return coords.size(); }
  Vec3 center(std::size_t voxel) const;
};

struct VoxelMap {
  std::vector<std::int32_t> point_to_voxel;
  std::vector<std::vector<std::int32_t>> voxel_to_points;
};

struct MaskPair {
  std::vector<double> voxel_logits;
  Mask voxel_mask;
  std::optional<Mask> point_mask;
};

struct Voxelized {
  VoxelScene scene;
  VoxelMap map;
};

// Grid anchored at the componentwise minimum of the cloud; a point p lands in
// floor((p - origin) / resolution). Voxels are ordered lexicographically.
Voxelized voxelize(const PointScene& scene, double resolution_m = kDefaultVoxelSize);

Mask unproject_mask(std::span<const std::uint8_t> voxel_mask, const VoxelMap& map);

// A voxel is positive when at least half of its member points carry the id.
Mask transfer_instance_label(const PointScene& scene, const VoxelMap& map, std::uint32_t instance_id);

// Point-level ground truth for one instance.
Mask instance_point_mask(const PointScene& scene, std::uint32_t instance_id);

// Instance ids present in the scene, ascending, excluding background.
std::vector<std::uint32_t> instance_ids(const PointScene& scene);

}  // namespace voxclick::grid

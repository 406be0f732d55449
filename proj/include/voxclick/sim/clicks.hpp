#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "voxclick/grid/scene.hpp"
#include "voxclick/model/clicks.hpp"

namespace voxclick::sim {

struct FirstClick {
  model::Click click;
  std::size_t point_index = 0;
  bool fallback = false;  // no non-object points; centroid-nearest point used
};

// Object point maximizing the Euclidean distance to the nearest non-object
// point (meters). Ties go to the lowest point index.
FirstClick first_click(const grid::PointScene& scene, std::uint32_t instance_id);

// Same rule over explicit point sets; object_mask[i] != 0 marks object points.
FirstClick first_click(std::span<const grid::Vec3> positions, std::span<const std::uint8_t> object_mask);

enum class ErrorKind : std::uint8_t { kFalseNegative, kFalsePositive };

struct ErrorRegion {
  ErrorKind kind = ErrorKind::kFalseNegative;
  std::vector<std::int32_t> voxels;  // ascending voxel indices
};

struct NextClick {
  bool converged = false;  // prediction equals ground truth; no click
  model::Click click;
  std::size_t voxel_index = 0;
  ErrorRegion region;
};

// 26-connected components of the voxels flagged in `mask`, each sorted, in
// order of their minimum voxel index.
std::vector<std::vector<std::int32_t>> connected_components(std::span<const grid::Coord> coords,
                                                            std::span<const std::uint8_t> mask);

// Largest error component (ties: false negatives first, then lowest minimum
// voxel index); its center is the member voxel farthest from every voxel
// outside the component (integer voxel distance, ties to the lowest index).
// False negatives yield positive clicks, false positives negative ones.
NextClick next_click(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> ground_truth,
                     const grid::VoxelScene& scene);

}  // namespace voxclick::sim

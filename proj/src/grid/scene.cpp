#include "voxclick/grid/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace voxclick::grid {

void PointScene::validate() const {
  if (positions.empty()) throw InputError("point scene is empty");
  if (colors.size() != positions.size()) throw InputError("point scene: colors/positions length mismatch");
  if (instance_labels && instance_labels->size() != positions.size()) {
    throw InputError("point scene: labels/positions length mismatch");
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      if (!std::isfinite(positions[i][a])) throw InputError("point " + std::to_string(i) + " has a non-finite position");
      if (!(colors[i][a] >= 0.0 && colors[i][a] <= 1.0)) {
        throw InputError("point " + std::to_string(i) + " has a color outside [0,1]");
      }
    }
  }
}

Bounds scene_bounds(std::span<const Vec3> positions) {
  if (positions.empty()) throw InputError("bounds of an empty point set");
  Bounds b{positions[0], positions[0]};
  for (const auto& p : positions) {
    for (int a = 0; a < 3; ++a) {
      b.min[a] = std::min(b.min[a], p[a]);
      b.max[a] = std::max(b.max[a], p[a]);
    }
  }
  return b;
}

Vec3 VoxelScene::center(std::size_t voxel) const {
  const Coord& c = coords[voxel];
  return {origin[0] + (c.x + 0.5) * resolution_m, origin[1] + (c.y + 0.5) * resolution_m,
          origin[2] + (c.z + 0.5) * resolution_m};
}

Voxelized voxelize(const PointScene& scene, double resolution_m) {
  if (!(resolution_m > 0.0) || !std::isfinite(resolution_m)) throw InputError("voxel resolution must be > 0");
  scene.validate();
  const std::size_t n = scene.size();
  const Bounds bounds = scene_bounds(scene.positions);

  std::vector<Coord> cell(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = scene.positions[i];
    cell[i] = {static_cast<std::int32_t>(std::floor((p[0] - bounds.min[0]) / resolution_m)),
               static_cast<std::int32_t>(std::floor((p[1] - bounds.min[1]) / resolution_m)),
               static_cast<std::int32_t>(std::floor((p[2] - bounds.min[2]) / resolution_m))};
  }
  std::vector<std::int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int32_t a, std::int32_t b) { return cell[a] < cell[b]; });

  Voxelized out;
  out.scene.resolution_m = resolution_m;
  out.scene.origin = bounds.min;
  out.map.point_to_voxel.assign(n, -1);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    const auto voxel = static_cast<std::int32_t>(out.scene.coords.size());
    Vec3 sum{0, 0, 0};
    std::vector<std::int32_t> members;
    while (j < n && cell[order[j]] == cell[order[i]]) {
      const std::int32_t p = order[j];
      members.push_back(p);
      out.map.point_to_voxel[p] = voxel;
      for (int a = 0; a < 3; ++a) sum[a] += scene.colors[p][a];
      ++j;
    }
    const double count = static_cast<double>(members.size());
    out.scene.coords.push_back(cell[order[i]]);
    out.scene.colors.push_back({sum[0] / count, sum[1] / count, sum[2] / count});
    out.map.voxel_to_points.push_back(std::move(members));
    i = j;
  }
  return out;
}

Mask unproject_mask(std::span<const std::uint8_t> voxel_mask, const VoxelMap& map) {
  if (voxel_mask.size() != map.voxel_to_points.size()) {
    throw ContractViolation("unproject_mask: voxel mask has " + std::to_string(voxel_mask.size()) +
                            " entries, map has " + std::to_string(map.voxel_to_points.size()) + " voxels");
  }
  Mask out(map.point_to_voxel.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = voxel_mask[static_cast<std::size_t>(map.point_to_voxel[i])];
  return out;
}

Mask transfer_instance_label(const PointScene& scene, const VoxelMap& map, std::uint32_t instance_id) {
  if (!scene.instance_labels) throw InputError("scene carries no instance labels");
  const auto& labels = *scene.instance_labels;
  if (instance_id == 0 || std::find(labels.begin(), labels.end(), instance_id) == labels.end()) {
    throw InputError("instance " + std::to_string(instance_id) + " has no points");
  }
  Mask out(map.voxel_to_points.size(), 0);
  for (std::size_t v = 0; v < out.size(); ++v) {
    const auto& members = map.voxel_to_points[v];
    std::size_t hits = 0;
    for (auto p : members) hits += labels[static_cast<std::size_t>(p)] == instance_id;
    out[v] = 2 * hits >= members.size() ? 1 : 0;
  }
  return out;
}

Mask instance_point_mask(const PointScene& scene, std::uint32_t instance_id) {
  if (!scene.instance_labels) throw InputError("scene carries no instance labels");
  Mask out(scene.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*scene.instance_labels)[i] == instance_id ? 1 : 0;
  return out;
}

std::vector<std::uint32_t> instance_ids(const PointScene& scene) {
  if (!scene.instance_labels) return {};
  std::set<std::uint32_t> ids(scene.instance_labels->begin(), scene.instance_labels->end());
  ids.erase(0);
  return {ids.begin(), ids.end()};
}

}  // namespace voxclick::grid

#pragma once

// Brute-force reference implementations. Deliberately naive: they share no
// code with the library beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "voxclick/grid/scene.hpp"

namespace oracle {

using voxclick::grid::Coord;
using voxclick::grid::Mask;
using voxclick::grid::Vec3;

struct Voxelization {
  std::vector<Coord> coords;             // sorted unique
  std::vector<std::int32_t> point_voxel;  // per point
  std::vector<Vec3> mean_colors;
};

inline Voxelization voxelize(const voxclick::grid::PointScene& s, double res) {
  Vec3 lo = s.positions[0];
  for (const auto& p : s.positions) {
    for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], p[a]);
  }
  std::vector<Coord> per_point;
  for (const auto& p : s.positions) {
    per_point.push_back({static_cast<std::int32_t>(std::floor((p[0] - lo[0]) / res)),
                         static_cast<std::int32_t>(std::floor((p[1] - lo[1]) / res)),
                         static_cast<std::int32_t>(std::floor((p[2] - lo[2]) / res))});
  }
  std::map<Coord, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < per_point.size(); ++i) members[per_point[i]].push_back(i);
  Voxelization v;
  std::map<Coord, std::int32_t> index;
  for (const auto& [c, pts] : members) {
    index[c] = static_cast<std::int32_t>(v.coords.size());
    v.coords.push_back(c);
    long double sum[3] = {0, 0, 0};
    for (auto i : pts) {
      for (int a = 0; a < 3; ++a) sum[a] += s.colors[i][a];
    }
    v.mean_colors.push_back({static_cast<double>(sum[0] / pts.size()), static_cast<double>(sum[1] / pts.size()),
                             static_cast<double>(sum[2] / pts.size())});
  }
  for (const auto& c : per_point) v.point_voxel.push_back(index[c]);
  return v;
}

// argmax over object points of min distance to non-object points; first
// index wins ties. Returns the point index.
inline std::size_t first_click(const std::vector<Vec3>& pos, const Mask& object) {
  double best = -1;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (!object[i]) continue;
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pos.size(); ++j) {
      if (object[j]) continue;
      const double dx = pos[i][0] - pos[j][0];
      const double dy = pos[i][1] - pos[j][1];
      const double dz = pos[i][2] - pos[j][2];
      nearest = std::min(nearest, dx * dx + dy * dy + dz * dz);
    }
    if (nearest > best) {
      best = nearest;
      arg = i;
    }
  }
  return arg;
}

inline bool touching(const Coord& a, const Coord& b) {
  return std::abs(a.x - b.x) <= 1 && std::abs(a.y - b.y) <= 1 && std::abs(a.z - b.z) <= 1 && !(a == b);
}

// Flood fill over the O(n^2) adjacency; components as sorted index lists.
inline std::vector<std::vector<std::int32_t>> components(const std::vector<Coord>& coords, const Mask& mask) {
  const std::size_t n = coords.size();
  std::vector<int> comp(n, -1);
  std::vector<std::vector<std::int32_t>> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (!mask[s] || comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    std::vector<std::size_t> frontier{s};
    comp[s] = id;
    std::vector<std::int32_t> members;
    while (!frontier.empty()) {
      const std::size_t v = frontier.back();
      frontier.pop_back();
      members.push_back(static_cast<std::int32_t>(v));
      for (std::size_t u = 0; u < n; ++u) {
        if (mask[u] && comp[u] < 0 && touching(coords[v], coords[u])) {
          comp[u] = id;
          frontier.push_back(u);
        }
      }
    }
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  return out;
}

struct NextClick {
  bool converged = false;
  bool positive = false;
  std::vector<std::int32_t> region;
  std::int32_t center = -1;
};

inline NextClick next_click(const std::vector<Coord>& coords, const Mask& pred, const Mask& gt) {
  const std::size_t n = coords.size();
  Mask fn(n), fp(n);
  for (std::size_t i = 0; i < n; ++i) {
    fn[i] = gt[i] && !pred[i];
    fp[i] = pred[i] && !gt[i];
  }
  struct Cand {
    std::vector<std::int32_t> voxels;
    bool fn;
  };
  std::vector<Cand> cands;
  for (auto& c : components(coords, fn)) cands.push_back({c, true});
  for (auto& c : components(coords, fp)) cands.push_back({c, false});
  NextClick out;
  if (cands.empty()) {
    out.converged = true;
    return out;
  }
  // Larger first, then FN before FP, then lower minimum index.
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.voxels.size() != b.voxels.size()) return a.voxels.size() > b.voxels.size();
    if (a.fn != b.fn) return a.fn;
    return a.voxels.front() < b.voxels.front();
  });
  const Cand& best = cands.front();
  Mask in(n, 0);
  for (auto v : best.voxels) in[static_cast<std::size_t>(v)] = 1;
  std::int64_t best_d = -1;
  for (auto v : best.voxels) {
    std::int64_t d = std::numeric_limits<std::int64_t>::max();
    for (std::size_t u = 0; u < n; ++u) {
      if (in[u]) continue;
      const std::int64_t dx = coords[static_cast<std::size_t>(v)].x - coords[u].x;
      const std::int64_t dy = coords[static_cast<std::size_t>(v)].y - coords[u].y;
      const std::int64_t dz = coords[static_cast<std::size_t>(v)].z - coords[u].z;
      d = std::min(d, dx * dx + dy * dy + dz * dz);
    }
    if (d > best_d) {
      best_d = d;
      out.center = v;
    }
  }
  out.positive = best.fn;
  out.region = best.voxels;
  return out;
}

}  // namespace oracle

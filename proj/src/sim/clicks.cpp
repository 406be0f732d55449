#include "voxclick/sim/clicks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <spdlog/spdlog.h>

namespace voxclick::sim {

namespace {

double squared_distance(const grid::Vec3& a, const grid::Vec3& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Uniform bucket grid over a point subset for exact nearest-neighbour
// distance queries.
class PointGrid {
 public:
  PointGrid(std::span<const grid::Vec3> positions, std::vector<std::size_t> members)
      : positions_(positions), members_(std::move(members)) {
    const grid::Bounds b = bounds_of(members_);
    origin_ = b.min;
    double volume = 1.0;
    for (int a = 0; a < 3; ++a) volume *= std::max(b.max[a] - b.min[a], 1e-3);
    // Roughly two points per occupied cell for surface-like clouds.
    cell_ = std::max(std::cbrt(volume / static_cast<double>(members_.size())) * 0.5, 1e-3);
    cell_ = std::max(cell_, std::sqrt(surface_area(b) / static_cast<double>(members_.size())) * 1.5);
    for (int a = 0; a < 3; ++a) dims_[a] = static_cast<std::int64_t>(std::floor((b.max[a] - b.min[a]) / cell_)) + 1;
    for (std::size_t i : members_) buckets_[cell_key(cell_of(positions_[i]))].push_back(i);
  }

  // Squared distance from p to the nearest member.
  double nearest(const grid::Vec3& p) const {
    const auto c = cell_of(p);
    double best = std::numeric_limits<double>::infinity();
    const std::int64_t max_ring = std::max({dims_[0], dims_[1], dims_[2]}) + 1;
    for (std::int64_t r = 0; r <= max_ring; ++r) {
      scan_ring(c, r, p, best);
      // Unvisited members lie at Chebyshev cell distance > r, i.e. at least
      // r * cell_ away from p.
      const double reach = static_cast<double>(r) * cell_;
      if (best <= reach * reach) break;
    }
    return best;
  }

 private:
  using Cell = std::array<std::int64_t, 3>;

  grid::Bounds bounds_of(const std::vector<std::size_t>& idx) const {
    grid::Bounds b{positions_[idx[0]], positions_[idx[0]]};
    for (std::size_t i : idx) {
      for (int a = 0; a < 3; ++a) {
        b.min[a] = std::min(b.min[a], positions_[i][a]);
        b.max[a] = std::max(b.max[a], positions_[i][a]);
      }
    }
    return b;
  }

  static double surface_area(const grid::Bounds& b) {
    const double x = std::max(b.max[0] - b.min[0], 1e-3);
    const double y = std::max(b.max[1] - b.min[1], 1e-3);
    const double z = std::max(b.max[2] - b.min[2], 1e-3);
    return 2.0 * (x * y + y * z + x * z);
  }

  Cell cell_of(const grid::Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor((p[0] - origin_[0]) / cell_)),
            static_cast<std::int64_t>(std::floor((p[1] - origin_[1]) / cell_)),
            static_cast<std::int64_t>(std::floor((p[2] - origin_[2]) / cell_))};
  }

  static std::uint64_t cell_key(const Cell& c) {
    const auto off = std::int64_t{1} << 20;
    return (static_cast<std::uint64_t>(c[0] + off) << 42) | (static_cast<std::uint64_t>(c[1] + off) << 21) |
           static_cast<std::uint64_t>(c[2] + off);
  }

  void visit(const Cell& c, const grid::Vec3& p, double& best) const {
    auto it = buckets_.find(cell_key(c));
    if (it == buckets_.end()) return;
    for (std::size_t i : it->second) best = std::min(best, squared_distance(p, positions_[i]));
  }

  void scan_ring(const Cell& c, std::int64_t r, const grid::Vec3& p, double& best) const {
    if (r == 0) {
      visit(c, p, best);
      return;
    }
    for (std::int64_t dx = -r; dx <= r; ++dx) {
      for (std::int64_t dy = -r; dy <= r; ++dy) {
        const bool edge = std::abs(dx) == r || std::abs(dy) == r;
        if (edge) {
          for (std::int64_t dz = -r; dz <= r; ++dz) visit({c[0] + dx, c[1] + dy, c[2] + dz}, p, best);
        } else {
          visit({c[0] + dx, c[1] + dy, c[2] - r}, p, best);
          visit({c[0] + dx, c[1] + dy, c[2] + r}, p, best);
        }
      }
    }
  }

  std::span<const grid::Vec3> positions_;
  std::vector<std::size_t> members_;
  grid::Vec3 origin_{};
  double cell_ = 1.0;
  std::array<std::int64_t, 3> dims_{};
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> buckets_;
};

// Voxel lookup through a dense array over the bounding box.
class DenseIndex {
 public:
  explicit DenseIndex(std::span<const grid::Coord> coords) {
    lo_ = hi_ = coords.empty() ? grid::Coord{0, 0, 0} : coords[0];
    for (const auto& c : coords) {
      lo_ = {std::min(lo_.x, c.x), std::min(lo_.y, c.y), std::min(lo_.z, c.z)};
      hi_ = {std::max(hi_.x, c.x), std::max(hi_.y, c.y), std::max(hi_.z, c.z)};
    }
    dims_ = {std::int64_t{hi_.x} - lo_.x + 1, std::int64_t{hi_.y} - lo_.y + 1, std::int64_t{hi_.z} - lo_.z + 1};
    const std::int64_t volume = dims_[0] * dims_[1] * dims_[2];
    if (volume > kMaxCells) throw InputError("voxel grid too large for click simulation");
    cells_.assign(static_cast<std::size_t>(volume), -1);
    for (std::size_t i = 0; i < coords.size(); ++i) {
      auto& slot = cells_[static_cast<std::size_t>(offset(coords[i].x, coords[i].y, coords[i].z))];
      if (slot >= 0) throw ContractViolation("duplicate voxel coordinate");
      slot = static_cast<std::int32_t>(i);
    }
  }

  std::int32_t find(std::int64_t x, std::int64_t y, std::int64_t z) const {
    if (x < lo_.x || y < lo_.y || z < lo_.z || x > hi_.x || y > hi_.y || z > hi_.z) return -1;
    return cells_[static_cast<std::size_t>(offset(x, y, z))];
  }

  const std::array<std::int64_t, 3>& dims() const { return dims_; }
  std::int64_t offset_of(const grid::Coord& c) const { return offset(c.x, c.y, c.z); }

 private:
  static constexpr std::int64_t kMaxCells = std::int64_t{1} << 28;

  std::int64_t offset(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return ((x - lo_.x) * dims_[1] + (y - lo_.y)) * dims_[2] + (z - lo_.z);
  }

  grid::Coord lo_{}, hi_{};
  std::array<std::int64_t, 3> dims_{};
  std::vector<std::int32_t> cells_;
};

constexpr std::int64_t kUnreached = std::numeric_limits<std::int64_t>::max();

// One pass of the separable squared Euclidean distance transform (lower
// envelope of parabolas). Inputs are small integers, so the breakpoint
// comparisons between rationals come out exact in double.
void distance_pass(std::vector<std::int64_t>& f, std::int64_t n, std::int64_t stride, std::int64_t start,
                   std::vector<std::int64_t>& line, std::vector<std::int64_t>& sites, std::vector<double>& bounds) {
  line.resize(static_cast<std::size_t>(n));
  sites.resize(static_cast<std::size_t>(n));
  bounds.resize(static_cast<std::size_t>(n) + 1);
  for (std::int64_t q = 0; q < n; ++q) line[static_cast<std::size_t>(q)] = f[static_cast<std::size_t>(start + q * stride)];
  auto height = [&](std::int64_t q) { return static_cast<double>(line[static_cast<std::size_t>(q)] + q * q); };
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    if (line[static_cast<std::size_t>(q)] == kUnreached) continue;
    if (k < 0) {
      k = 0;
      sites[0] = q;
      bounds[0] = -std::numeric_limits<double>::infinity();
      bounds[1] = std::numeric_limits<double>::infinity();
      continue;
    }
    double cut;
    while (true) {
      const std::int64_t v = sites[static_cast<std::size_t>(k)];
      cut = (height(q) - height(v)) / static_cast<double>(2 * (q - v));
      if (cut <= bounds[static_cast<std::size_t>(k)]) {
        --k;  // bounds[0] is -inf, so k stays >= 0
      } else {
        break;
      }
    }
    ++k;
    sites[static_cast<std::size_t>(k)] = q;
    bounds[static_cast<std::size_t>(k)] = cut;
    bounds[static_cast<std::size_t>(k) + 1] = std::numeric_limits<double>::infinity();
  }
  if (k < 0) return;  // no reachable cell on this line
  k = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    while (bounds[static_cast<std::size_t>(k) + 1] < static_cast<double>(q)) ++k;
    const std::int64_t v = sites[static_cast<std::size_t>(k)];
    f[static_cast<std::size_t>(start + q * stride)] = (q - v) * (q - v) + line[static_cast<std::size_t>(v)];
  }
}

// Squared distance from every cell to the nearest source cell (f == 0).
void distance_transform(std::vector<std::int64_t>& f, const std::array<std::int64_t, 3>& dims) {
  std::vector<std::int64_t> line, sites;
  std::vector<double> bounds;
  const std::int64_t sx = dims[1] * dims[2], sy = dims[2];
  for (std::int64_t y = 0; y < dims[1]; ++y) {
    for (std::int64_t z = 0; z < dims[2]; ++z) distance_pass(f, dims[0], sx, y * sy + z, line, sites, bounds);
  }
  for (std::int64_t x = 0; x < dims[0]; ++x) {
    for (std::int64_t z = 0; z < dims[2]; ++z) distance_pass(f, dims[1], sy, x * sx + z, line, sites, bounds);
  }
  for (std::int64_t x = 0; x < dims[0]; ++x) {
    for (std::int64_t y = 0; y < dims[1]; ++y) distance_pass(f, dims[2], 1, x * sx + y * sy, line, sites, bounds);
  }
}

model::Click positive_click_at(const grid::Vec3& p) {
  model::Click c;
  c.position = p;
  c.label = model::ClickLabel::kPositive;
  return c;
}

}  // namespace

FirstClick first_click(std::span<const grid::Vec3> positions, std::span<const std::uint8_t> object_mask) {
  if (positions.size() != object_mask.size()) throw ContractViolation("first_click: mask/positions length mismatch");
  std::vector<std::size_t> object, background;
  for (std::size_t i = 0; i < positions.size(); ++i) (object_mask[i] ? object : background).push_back(i);
  if (object.empty()) throw InputError("first_click: the instance has no points");

  FirstClick out;
  if (background.empty()) {
    spdlog::warn("first_click: scene has no non-object points; using the point nearest the instance centroid");
    grid::Vec3 centroid{0, 0, 0};
    for (std::size_t i : object) {
      for (int a = 0; a < 3; ++a) centroid[a] += positions[i][a];
    }
    for (int a = 0; a < 3; ++a) centroid[a] /= static_cast<double>(object.size());
    std::size_t best = object[0];
    for (std::size_t i : object) {
      if (squared_distance(positions[i], centroid) < squared_distance(positions[best], centroid)) best = i;
    }
    out.point_index = best;
    out.click = positive_click_at(positions[best]);
    out.fallback = true;
    return out;
  }

  const PointGrid index(positions, std::move(background));
  double best_distance = -1.0;
  std::size_t best = object[0];
  for (std::size_t i : object) {
    const double d = index.nearest(positions[i]);
    if (d > best_distance) {
      best_distance = d;
      best = i;
    }
  }
  out.point_index = best;
  out.click = positive_click_at(positions[best]);
  return out;
}

FirstClick first_click(const grid::PointScene& scene, std::uint32_t instance_id) {
  return first_click(scene.positions, grid::instance_point_mask(scene, instance_id));
}

std::vector<std::vector<std::int32_t>> connected_components(std::span<const grid::Coord> coords,
                                                            std::span<const std::uint8_t> mask) {
  if (coords.size() != mask.size()) throw ContractViolation("connected_components: mask/coords length mismatch");
  const DenseIndex index(coords);
  std::vector<std::int32_t> label(coords.size(), -1);
  std::vector<std::vector<std::int32_t>> components;
  std::vector<std::int32_t> stack;
  for (std::size_t seed = 0; seed < coords.size(); ++seed) {
    if (!mask[seed] || label[seed] >= 0) continue;
    const auto id = static_cast<std::int32_t>(components.size());
    components.emplace_back();
    auto& comp = components.back();
    label[seed] = id;
    stack.assign(1, static_cast<std::int32_t>(seed));
    while (!stack.empty()) {
      const std::int32_t v = stack.back();
      stack.pop_back();
      comp.push_back(v);
      const grid::Coord& c = coords[static_cast<std::size_t>(v)];
      for (int dx = -1; dx <= 1; ++dx) {
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dz = -1; dz <= 1; ++dz) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const std::int32_t n = index.find(c.x + dx, c.y + dy, c.z + dz);
            if (n < 0 || !mask[static_cast<std::size_t>(n)] || label[static_cast<std::size_t>(n)] >= 0) continue;
            label[static_cast<std::size_t>(n)] = id;
            stack.push_back(n);
          }
        }
      }
    }
    std::sort(comp.begin(), comp.end());
  }
  return components;
}

NextClick next_click(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> ground_truth,
                     const grid::VoxelScene& scene) {
  const std::size_t n = scene.size();
  if (predicted.size() != n || ground_truth.size() != n) {
    throw ContractViolation("next_click: masks must have one entry per voxel");
  }
  grid::Mask fn(n), fp(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    fn[i] = ground_truth[i] && !predicted[i];
    fp[i] = predicted[i] && !ground_truth[i];
    any = any || fn[i] || fp[i];
  }
  NextClick out;
  if (!any) {
    out.converged = true;
    return out;
  }

  // Candidates in tie-break order: FN components then FP components, each
  // list already ordered by minimum voxel index; a strict size comparison
  // then keeps the first of equally sized regions.
  ErrorRegion best;
  bool have = false;
  for (ErrorKind kind : {ErrorKind::kFalseNegative, ErrorKind::kFalsePositive}) {
    for (auto& comp : connected_components(scene.coords, kind == ErrorKind::kFalseNegative ? fn : fp)) {
      if (!have || comp.size() > best.voxels.size()) {
        best.kind = kind;
        best.voxels = std::move(comp);
        have = true;
      }
    }
  }

  // Voxels outside the component are the distance sources; empty cells of
  // the grid are just space.
  grid::Mask inside(n, 0);
  for (auto v : best.voxels) inside[static_cast<std::size_t>(v)] = 1;
  const DenseIndex index(scene.coords);
  const auto& dims = index.dims();
  std::vector<std::int64_t> dist(static_cast<std::size_t>(dims[0] * dims[1] * dims[2]), kUnreached);
  for (std::size_t i = 0; i < n; ++i) {
    if (!inside[i]) dist[static_cast<std::size_t>(index.offset_of(scene.coords[i]))] = 0;
  }
  distance_transform(dist, dims);

  std::int64_t best_distance = -1;
  std::int32_t center = best.voxels.front();
  for (auto v : best.voxels) {
    // kUnreached (no outside voxel at all) compares greater than any distance.
    const std::int64_t d = dist[static_cast<std::size_t>(index.offset_of(scene.coords[static_cast<std::size_t>(v)]))];
    if (d > best_distance) {
      best_distance = d;
      center = v;
    }
  }

  out.voxel_index = static_cast<std::size_t>(center);
  out.click.position = scene.center(out.voxel_index);
  out.click.label = best.kind == ErrorKind::kFalseNegative ? model::ClickLabel::kPositive : model::ClickLabel::kNegative;
  out.region = std::move(best);
  return out;
}

}  // namespace voxclick::sim

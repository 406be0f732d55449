#include "voxclick/diff/sparse_conv.hpp"

#include <algorithm>

namespace voxclick::diff {

namespace {

constexpr std::int32_t kCoordLimit = 1 << 20;

std::int32_t floor_div2(std::int32_t v) { return v >= 0 ? v / 2 : -((-v + 1) / 2); }

}  // namespace

std::uint64_t CoordIndex::key(const Coord& c) {
  if (c.x <= -kCoordLimit || c.x >= kCoordLimit || c.y <= -kCoordLimit || c.y >= kCoordLimit ||
      c.z <= -kCoordLimit || c.z >= kCoordLimit) {
    throw ContractViolation("voxel coordinate outside the +-2^20 addressable range");
  }
  const auto ux = static_cast<std::uint64_t>(c.x + kCoordLimit);
  const auto uy = static_cast<std::uint64_t>(c.y + kCoordLimit);
  const auto uz = static_cast<std::uint64_t>(c.z + kCoordLimit);
  return (ux << 42) | (uy << 21) | uz;
}

CoordIndex::CoordIndex(std::span<const Coord> coords) {
  map_.reserve(coords.size() * 2);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    auto [it, fresh] = map_.emplace(key(coords[i]), static_cast<std::int32_t>(i));
    if (!fresh) {
      throw ContractViolation("duplicate voxel coordinate (" + std::to_string(coords[i].x) + "," +
                              std::to_string(coords[i].y) + "," + std::to_string(coords[i].z) + ")");
    }
  }
}

std::int32_t CoordIndex::find(const Coord& c) const {
  auto it = map_.find(key(c));
  return it == map_.end() ? -1 : it->second;
}

std::size_t Rulebook::pair_count() const {
  std::size_t n = 0;
  for (const auto& v : in_rows) n += v.size();
  return n;
}

Rulebook submanifold_rules(std::span<const Coord> coords, std::array<int, 3> extent) {
  for (int e : extent) {
    if (e <= 0 || e % 2 == 0) throw ConfigError("sparse kernel extent must be odd and positive");
  }
  const CoordIndex index(coords);
  Rulebook rb;
  rb.n_in = rb.n_out = coords.size();
  rb.kernel_volume = extent[0] * extent[1] * extent[2];
  rb.in_rows.resize(static_cast<std::size_t>(rb.kernel_volume));
  rb.out_rows.resize(static_cast<std::size_t>(rb.kernel_volume));
  const int rx = extent[0] / 2, ry = extent[1] / 2, rz = extent[2] / 2;
  int k = 0;
  for (int dx = -rx; dx <= rx; ++dx) {
    for (int dy = -ry; dy <= ry; ++dy) {
      for (int dz = -rz; dz <= rz; ++dz, ++k) {
        if (dx == 0 && dy == 0 && dz == 0) {
          rb.identity_offset = k;
          auto& in = rb.in_rows[static_cast<std::size_t>(k)];
          in.resize(coords.size());
          for (std::size_t i = 0; i < coords.size(); ++i) in[i] = static_cast<std::int32_t>(i);
          rb.out_rows[static_cast<std::size_t>(k)] = in;
          continue;
        }
        auto& in = rb.in_rows[static_cast<std::size_t>(k)];
        auto& out = rb.out_rows[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < coords.size(); ++i) {
          const Coord n{coords[i].x + dx, coords[i].y + dy, coords[i].z + dz};
          const std::int32_t j = index.find(n);
          if (j >= 0) {
            in.push_back(j);
            out.push_back(static_cast<std::int32_t>(i));
          }
        }
      }
    }
  }
  return rb;
}

Downsampled downsample_rules(std::span<const Coord> fine) {
  Downsampled ds;
  std::vector<Coord> parents(fine.size());
  for (std::size_t i = 0; i < fine.size(); ++i) {
    parents[i] = {floor_div2(fine[i].x), floor_div2(fine[i].y), floor_div2(fine[i].z)};
  }
  ds.coords = parents;
  std::sort(ds.coords.begin(), ds.coords.end());
  ds.coords.erase(std::unique(ds.coords.begin(), ds.coords.end()), ds.coords.end());
  const CoordIndex coarse(ds.coords);

  Rulebook& rb = ds.rules;
  rb.n_in = fine.size();
  rb.n_out = ds.coords.size();
  rb.kernel_volume = 8;
  rb.in_rows.resize(8);
  rb.out_rows.resize(8);
  for (std::size_t i = 0; i < fine.size(); ++i) {
    const Coord& p = parents[i];
    const int k = (fine[i].x - 2 * p.x) * 4 + (fine[i].y - 2 * p.y) * 2 + (fine[i].z - 2 * p.z);
    rb.in_rows[static_cast<std::size_t>(k)].push_back(static_cast<std::int32_t>(i));
    rb.out_rows[static_cast<std::size_t>(k)].push_back(coarse.find(p));
  }
  return ds;
}

Rulebook transpose_rules(const Rulebook& rules) {
  Rulebook rb;
  rb.n_in = rules.n_out;
  rb.n_out = rules.n_in;
  rb.kernel_volume = rules.kernel_volume;
  rb.in_rows = rules.out_rows;
  rb.out_rows = rules.in_rows;
  rb.identity_offset = rules.identity_offset;
  return rb;
}

template <typename T>
Tensor<T> sparse_conv3d(const Tensor<T>& features, std::span<const Coord> coords, const SparseKernel<T>& kernel) {
  detail::require(features.rows() == coords.size(), "sparse_conv3d: one feature row per coordinate required");
  detail::require(features.cols() == kernel.in_channels, "sparse_conv3d: feature width != kernel in_channels");
  detail::require(kernel.weights.rows() == static_cast<std::size_t>(kernel.volume()) * kernel.in_channels &&
                      kernel.weights.cols() == kernel.out_channels,
                  "sparse_conv3d: kernel weight shape mismatch");
  auto rules = std::make_shared<const Rulebook>(submanifold_rules(coords, kernel.extent));
  return sparse_conv(features, rules, kernel.weights);
}

template Tensor<float> sparse_conv3d(const Tensor<float>&, std::span<const Coord>, const SparseKernel<float>&);
template Tensor<double> sparse_conv3d(const Tensor<double>&, std::span<const Coord>, const SparseKernel<double>&);

}  // namespace voxclick::diff

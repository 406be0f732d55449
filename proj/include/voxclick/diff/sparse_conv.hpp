#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "voxclick/diff/ops.hpp"

namespace voxclick::diff {

struct Coord {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;
  auto operator<=>(const Coord&) const = default;
};

// Coordinate -> row lookup. Construction rejects duplicate coordinates.
class CoordIndex {
 public:
  CoordIndex() = default;
  explicit CoordIndex(std::span<const Coord> coords);

  // -1 when absent.
  std::int32_t find(const Coord& c) const;
  std::size_t size() const { return map_.size(); }

  static std::uint64_t key(const Coord& c);

 private:
  std::unordered_map<std::uint64_t, std::int32_t> map_;
};

// Gather/scatter pairs per kernel offset: output row out_rows[k][j] receives
// features[in_rows[k][j]] * W_k.
struct Rulebook {
  std::size_t n_in = 0;
  std::size_t n_out = 0;
  int kernel_volume = 0;
  std::vector<std::vector<std::int32_t>> in_rows;
  std::vector<std::vector<std::int32_t>> out_rows;
  // Offset whose pairs are exactly (i, i) for every row, or -1.
  int identity_offset = -1;

  std::size_t pair_count() const;
};

// Submanifold rules: output sites = input sites, centered odd kernel.
Rulebook submanifold_rules(std::span<const Coord> coords, std::array<int, 3> extent);

struct Downsampled {
  std::vector<Coord> coords;  // lexicographically sorted coarse sites
  Rulebook rules;             // fine -> coarse, kernel 2x2x2
};

// Stride-2, kernel-2 downsampling: every fine site feeds floor(c / 2).
Downsampled downsample_rules(std::span<const Coord> fine);

// Transposed counterpart (coarse -> fine) sharing the same pair structure.
Rulebook transpose_rules(const Rulebook& rules);

template <typename T>
struct SparseKernel {
  std::array<int, 3> extent{3, 3, 3};
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  // (extent_x * extent_y * extent_z * in_channels) x out_channels; block k
  // holds the in x out matrix of kernel offset k.
  Tensor<T> weights;

  int volume() const { return extent[0] * extent[1] * extent[2]; }
};

// Submanifold sparse 3-D convolution over unique voxel coordinates.
template <typename T>
Tensor<T> sparse_conv3d(const Tensor<T>& features, std::span<const Coord> coords,
                        const SparseKernel<T>& kernel);

}  // namespace voxclick::diff

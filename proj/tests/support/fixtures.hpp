#pragma once

#include <cstdlib>
#include <random>
#include <vector>

#include "voxclick/data/generator.hpp"
#include "voxclick/grid/scene.hpp"
#include "voxclick/model/config.hpp"
#include "voxclick/model/model.hpp"

namespace fixture {

using voxclick::grid::PointScene;
using voxclick::grid::Vec3;

// Cloud of n points in a box of the given size with random colors and
// labels in [0, n_labels].
inline PointScene random_cloud(std::mt19937_64& rng, std::size_t n, double size, std::uint32_t n_labels = 3) {
  std::uniform_real_distribution<double> u(0.0, size), c(0.0, 1.0);
  std::uniform_int_distribution<std::uint32_t> lab(0, n_labels);
  PointScene s;
  s.instance_labels.emplace();
  for (std::size_t i = 0; i < n; ++i) {
    s.positions.push_back({u(rng), u(rng), u(rng)});
    s.colors.push_back({c(rng), c(rng), c(rng)});
    s.instance_labels->push_back(lab(rng));
  }
  return s;
}

// Labeled cloud whose points sit on a coarse lattice so that distance ties
// are common, with clustered instances.
inline PointScene lattice_scene(std::mt19937_64& rng, std::size_t max_points) {
  std::uniform_int_distribution<int> ext(4, 14), cell(0, 1 << 20);
  const int nx = ext(rng), ny = ext(rng), nz = std::uniform_int_distribution<int>(1, 4)(rng);
  std::bernoulli_distribution keep(0.7);
  std::uniform_real_distribution<double> col(0.0, 1.0);
  const int n_obj = std::uniform_int_distribution<int>(1, 3)(rng);
  struct Box {
    int x0, x1, y0, y1;
  };
  std::vector<Box> boxes;
  for (int k = 0; k < n_obj; ++k) {
    const int x0 = std::uniform_int_distribution<int>(0, nx - 2)(rng);
    const int y0 = std::uniform_int_distribution<int>(0, ny - 2)(rng);
    boxes.push_back({x0, std::uniform_int_distribution<int>(x0 + 1, nx - 1)(rng), y0,
                     std::uniform_int_distribution<int>(y0 + 1, ny - 1)(rng)});
  }
  PointScene s;
  s.instance_labels.emplace();
  const double step = 0.05;
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) {
      for (int z = 0; z < nz; ++z) {
        if (!keep(rng) || s.size() >= max_points) continue;
        std::uint32_t label = 0;
        for (std::size_t k = 0; k < boxes.size(); ++k) {
          if (x >= boxes[k].x0 && x <= boxes[k].x1 && y >= boxes[k].y0 && y <= boxes[k].y1) {
            label = static_cast<std::uint32_t>(k + 1);
          }
        }
        s.positions.push_back({x * step, y * step, z * step});
        s.colors.push_back({col(rng), col(rng), col(rng)});
        s.instance_labels->push_back(label);
      }
    }
  }
  if (s.size() == 0) {
    s.positions.push_back({0, 0, 0});
    s.colors.push_back({0.5, 0.5, 0.5});
    s.instance_labels->push_back(1);
  }
  return s;
}

// Ground truth with a random cube of voxels flipped plus 3% flip noise.
inline voxclick::grid::Mask perturbed_mask(const voxclick::grid::VoxelScene& scene, const voxclick::grid::Mask& gt,
                                           std::mt19937_64& rng) {
  voxclick::grid::Mask pred = gt;
  std::uniform_int_distribution<std::size_t> pick(0, scene.size() - 1);
  const auto c = scene.coords[pick(rng)];
  const int r = std::uniform_int_distribution<int>(0, 3)(rng);
  std::bernoulli_distribution noise(0.03);
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto& v = scene.coords[i];
    if (std::abs(v.x - c.x) <= r && std::abs(v.y - c.y) <= r && std::abs(v.z - c.z) <= r) pred[i] = !pred[i];
    if (noise(rng)) pred[i] = !pred[i];
  }
  return pred;
}

// Small model for gradient checks and fast tests.
inline voxclick::model::ModelConfig tiny_config(voxclick::model::FusionMode mode = voxclick::model::FusionMode::kImplicit,
                                                bool negative = true, std::uint64_t seed = 7) {
  voxclick::model::ModelConfig c;
  c.unet.levels = 2;
  c.unet.base_channels = 4;
  c.unet.embed_dim = 8;
  c.decoder.blocks = 1;
  c.decoder.heads = 2;
  c.decoder.mlp_dim = 16;
  c.fusion.mode = mode;
  c.fusion.use_negative_embedding = negative;
  c.seed = seed;
  return c;
}

// Small synthetic room for model-level tests.
inline voxclick::data::SceneRecipe small_recipe(std::uint64_t seed) {
  voxclick::data::SceneRecipe r;
  r.seed = seed;
  r.room_extent = {0.8, 0.8};
  r.min_objects = 1;
  r.max_objects = 2;
  r.max_object_size = 0.3;
  r.min_points_per_object = 60;
  r.max_points_per_object = 200;
  r.background_density = 400;
  return r;
}

}  // namespace fixture

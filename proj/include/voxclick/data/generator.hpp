#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxclick/grid/scene.hpp"

namespace voxclick::data {

enum class Primitive : std::uint8_t { kBox, kSphere, kCylinder };

std::string to_string(Primitive p);
Primitive primitive_from_string(const std::string& s);

struct SceneRecipe {
  std::uint64_t seed = 0;
  std::array<double, 2> room_extent{1.4, 1.4};  // floor size in meters (x, y)
  double wall_height = 0.0;                     // 0 = no walls
  int min_objects = 2;
  int max_objects = 4;
  std::vector<Primitive> primitives{Primitive::kBox, Primitive::kSphere, Primitive::kCylinder};
  double min_object_size = 0.14;  // footprint diameter range
  double max_object_size = 0.40;
  int min_points_per_object = 150;
  int max_points_per_object = 700;
  double object_density = 2200;      // surface points per m^2 before clamping
  double background_density = 1200;  // floor and wall points per m^2
  double color_noise = 0.04;
  std::vector<grid::Vec3> palette{{0.85, 0.20, 0.20}, {0.20, 0.65, 0.25}, {0.20, 0.35, 0.85}, {0.90, 0.75, 0.15},
                                  {0.70, 0.25, 0.75}, {0.15, 0.75, 0.80}, {0.95, 0.50, 0.15}, {0.55, 0.40, 0.25}};
  grid::Vec3 floor_color{0.60, 0.58, 0.55};
  grid::Vec3 wall_color{0.80, 0.80, 0.78};

  void validate() const;
};

void to_json(nlohmann::json& j, const SceneRecipe& r);
void from_json(const nlohmann::json& j, SceneRecipe& r);

// Labeled scene: floor (and optional walls) with label 0, primitives resting
// on the floor with labels 1..k. Positions are stored at f32 precision and
// colors at u8 precision so the scene survives a file round trip unchanged.
grid::PointScene generate_scene(const SceneRecipe& recipe);

// Recipe for the i-th scene of a dataset: same parameters, seed + i.
SceneRecipe nth_recipe(const SceneRecipe& base, std::uint64_t index);

}  // namespace voxclick::data

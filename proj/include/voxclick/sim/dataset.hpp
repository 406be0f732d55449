#pragma once

#include <filesystem>
#include <vector>

#include "voxclick/data/generator.hpp"
#include "voxclick/sim/trainer.hpp"

namespace voxclick::sim {

// Scenes in file-name order, named by file stem.
std::vector<LabeledScene> load_dataset(const std::filesystem::path& dir,
                                       double voxel_size = grid::kDefaultVoxelSize);

// Scenes generated from nth_recipe(recipe, first) .. nth_recipe(recipe, first + count - 1).
std::vector<LabeledScene> generate_dataset(const data::SceneRecipe& recipe, std::size_t count,
                                           std::uint64_t first = 0, double voxel_size = grid::kDefaultVoxelSize);

}  // namespace voxclick::sim

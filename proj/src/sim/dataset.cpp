#include "voxclick/sim/dataset.hpp"

#include <fmt/format.h>

#include "voxclick/data/scene_io.hpp"

namespace voxclick::sim {

std::vector<LabeledScene> load_dataset(const std::filesystem::path& dir, double voxel_size) {
  std::vector<LabeledScene> out;
  for (const auto& path : data::list_scene_files(dir)) {
    out.push_back(prepare_labeled_scene(data::load_scene_any(path), voxel_size, path.stem().string()));
  }
  if (out.empty()) throw InputError("no scene files in " + dir.string());
  return out;
}

std::vector<LabeledScene> generate_dataset(const data::SceneRecipe& recipe, std::size_t count, std::uint64_t first,
                                           double voxel_size) {
  std::vector<LabeledScene> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const data::SceneRecipe r = data::nth_recipe(recipe, first + i);
    out.push_back(prepare_labeled_scene(data::generate_scene(r), voxel_size, fmt::format("scene_{:05d}", first + i)));
  }
  return out;
}

}  // namespace voxclick::sim

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxclick/grid/scene.hpp"

namespace voxclick::data {

// E3D-PC v1, little endian:
//   "E3DP" | u32 version = 1 | u64 n | u32 flags (bit 0: labels present)
//   n x f32[3] positions | n x u8[3] colors (c * 255) | [n x u32 labels]
inline constexpr char kSceneMagic[4] = {'E', '3', 'D', 'P'};
inline constexpr std::uint32_t kSceneVersion = 1;
inline constexpr const char* kSceneExtension = ".e3dpc";

std::string encode_scene(const grid::PointScene& scene);
grid::PointScene decode_scene(std::string_view bytes);

void save_scene(const grid::PointScene& scene, const std::filesystem::path& path);
grid::PointScene load_scene(const std::filesystem::path& path);

// {"format":"e3dpc","version":1,"positions":[[x,y,z],...],"colors":[[r,g,b],...],"labels":[...]}
// with colors as 0..255 integers.
nlohmann::json scene_to_json(const grid::PointScene& scene);
grid::PointScene scene_from_json(const nlohmann::json& j);

// Scene files (.e3dpc or .json) in a directory, sorted by file name.
std::vector<std::filesystem::path> list_scene_files(const std::filesystem::path& dir);

// Loads either format by extension.
grid::PointScene load_scene_any(const std::filesystem::path& path);

}  // namespace voxclick::data

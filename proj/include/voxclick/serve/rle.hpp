#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxclick/grid/scene.hpp"

namespace voxclick::serve {

// Runs of set entries as [start, length, start, length, ...], ascending.
std::vector<std::uint64_t> encode_runs(std::span<const std::uint8_t> mask);
grid::Mask decode_runs(std::uint64_t n, std::span<const std::uint64_t> runs);

// {"n_points": n, "runs": [...]}
nlohmann::json mask_to_json(std::span<const std::uint8_t> mask);
grid::Mask mask_from_json(const nlohmann::json& j);

}  // namespace voxclick::serve

#include "voxclick/serve/rle.hpp"

#include "voxclick/errors.hpp"

namespace voxclick::serve {

std::vector<std::uint64_t> encode_runs(std::span<const std::uint8_t> mask) {
  std::vector<std::uint64_t> runs;
  std::size_t i = 0;
  while (i < mask.size()) {
    if (!mask[i]) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < mask.size() && mask[i]) ++i;
    runs.push_back(start);
    runs.push_back(i - start);
  }
  return runs;
}

grid::Mask decode_runs(std::uint64_t n, std::span<const std::uint64_t> runs) {
  if (runs.size() % 2 != 0) throw FormatError("mask runs must come in (start, length) pairs");
  grid::Mask m(n, 0);
  // Canonical form only: runs separated by at least one zero.
  std::uint64_t end = 0;
  for (std::size_t r = 0; r < runs.size(); r += 2) {
    const std::uint64_t start = runs[r], len = runs[r + 1];
    if (len == 0 || (r > 0 && start <= end) || start > n || len > n - start) throw FormatError("mask runs out of order or range");
    for (std::uint64_t i = start; i < start + len; ++i) m[i] = 1;
    end = start + len;
  }
  return m;
}

nlohmann::json mask_to_json(std::span<const std::uint8_t> mask) {
  return {{"n_points", mask.size()}, {"runs", encode_runs(mask)}};
}

grid::Mask mask_from_json(const nlohmann::json& j) {
  try {
    return decode_runs(j.at("n_points").get<std::uint64_t>(), j.at("runs").get<std::vector<std::uint64_t>>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed mask JSON: ") + e.what());
  }
}

}  // namespace voxclick::serve

#pragma once

// Checkpoint container: "VXCK" magic, u32 version, u64 manifest length, a JSON
// manifest (model config + tensor names/shapes/offsets) and the parameter
// payload as little-endian float32 in manifest order. Decoding and re-encoding
// a file reproduces it byte for byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxclick/diff/parameters.hpp"

namespace voxclick::diff {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  std::vector<std::size_t> shape;
  bool trainable = true;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

template <typename T>
Checkpoint snapshot(const ParameterSet<T>& params, nlohmann::json config);

// Overwrites every parameter from the checkpoint. Names and shapes must match
// exactly; extra or missing tensors are a FormatError.
template <typename T>
void restore(ParameterSet<T>& params, const Checkpoint& ckpt);

}  // namespace voxclick::diff

#include "voxclick/diff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace voxclick::diff {

namespace {

constexpr char kMagic[4] = {'V', 'X', 'C', 'K'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(std::string_view bytes, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(i)])) << (8 * i);
  }
  return v;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["format"] = "voxclick.checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["config"] = ckpt.config;
  auto& list = manifest["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (element_count(t.shape) != t.data.size()) {
      throw ContractViolation("checkpoint tensor " + t.name + ": data size does not match shape");
    }
    list.push_back({{"name", t.name}, {"shape", t.shape}, {"trainable", t.trainable}, {"offset", offset}});
    offset += t.data.size();
  }
  manifest["payload_floats"] = offset;
  const std::string text = manifest.dump();

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset * 4);
  for (const auto& t : ckpt.tensors) {
    for (float f : t.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint64_t manifest_size = get_le(bytes, 8, 8);
  if (manifest_size > bytes.size() - 16) throw FormatError("checkpoint: truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, manifest_size));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: manifest is not valid JSON: ") + e.what());
  }
  const std::size_t payload_at = 16 + manifest_size;
  const std::uint64_t total = manifest.value("payload_floats", std::uint64_t{0});
  if (bytes.size() != payload_at + total * 4) throw FormatError("checkpoint: payload size mismatch");

  Checkpoint ckpt;
  ckpt.config = manifest.value("config", nlohmann::json::object());
  try {
    for (const auto& entry : manifest.at("tensors")) {
      CheckpointTensor t;
      t.name = entry.at("name").get<std::string>();
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      t.trainable = entry.at("trainable").get<bool>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const std::size_t n = element_count(t.shape);
      if (offset + n > total) throw FormatError("checkpoint: tensor " + t.name + " overruns payload");
      t.data.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        t.data[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(bytes, payload_at + (offset + i) * 4, 4)));
      }
      ckpt.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed manifest: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("checkpoint not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

template <typename T>
Checkpoint snapshot(const ParameterSet<T>& params, nlohmann::json config) {
  Checkpoint ckpt;
  ckpt.config = std::move(config);
  for (const auto& [name, entry] : params.entries()) {
    CheckpointTensor t;
    t.name = name;
    t.shape = {entry.tensor.rows(), entry.tensor.cols()};
    t.trainable = entry.trainable;
    const auto& v = entry.tensor.value();
    t.data.resize(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(v.data()[i]);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

template <typename T>
void restore(ParameterSet<T>& params, const Checkpoint& ckpt) {
  if (ckpt.tensors.size() != params.entries().size()) {
    throw FormatError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                      std::to_string(params.entries().size()));
  }
  for (const auto& t : ckpt.tensors) {
    if (!params.contains(t.name)) throw FormatError("checkpoint tensor not in model: " + t.name);
    Tensor<T> target = params.at(t.name);
    if (t.shape != std::vector<std::size_t>{target.rows(), target.cols()}) {
      throw FormatError("checkpoint tensor " + t.name + " has the wrong shape");
    }
    // Frozen entries are constants; write through the node directly.
    Matrix<T>& v = target.node()->value;
    for (std::size_t i = 0; i < t.data.size(); ++i) v.data()[i] = static_cast<T>(t.data[i]);
  }
}

template Checkpoint snapshot(const ParameterSet<float>&, nlohmann::json);
template Checkpoint snapshot(const ParameterSet<double>&, nlohmann::json);
template void restore(ParameterSet<float>&, const Checkpoint&);
template void restore(ParameterSet<double>&, const Checkpoint&);

}  // namespace voxclick::diff

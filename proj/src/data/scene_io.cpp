#include "voxclick/data/scene_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "voxclick/errors.hpp"

namespace voxclick::data {

static_assert(std::endian::native == std::endian::little, "scene I/O assumes a little-endian host");

namespace {

template <typename V>
void put(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <typename V>
  V get() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw FormatError("scene file truncated");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint8_t color_byte(double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

}  // namespace

std::string encode_scene(const grid::PointScene& scene) {
  scene.validate();
  std::string out;
  const std::size_t n = scene.size();
  out.reserve(24 + n * (12 + 3 + (scene.has_labels() ? 4 : 0)));
  out.append(kSceneMagic, 4);
  put<std::uint32_t>(out, kSceneVersion);
  put<std::uint64_t>(out, n);
  put<std::uint32_t>(out, scene.has_labels() ? 1u : 0u);
  for (const auto& p : scene.positions) {
    for (double v : p) put<float>(out, static_cast<float>(v));
  }
  for (const auto& c : scene.colors) {
    for (double v : c) put<std::uint8_t>(out, color_byte(v));
  }
  if (scene.has_labels()) {
    for (auto l : *scene.instance_labels) put<std::uint32_t>(out, l);
  }
  return out;
}

grid::PointScene decode_scene(std::string_view bytes) {
  Reader r(bytes);
  r.need(4);
  if (std::memcmp(bytes.data(), kSceneMagic, 4) != 0) throw FormatError("not an E3D-PC scene (bad magic)");
  r.get<std::uint32_t>();
  const auto version = r.get<std::uint32_t>();
  if (version != kSceneVersion) throw FormatError("unsupported E3D-PC version " + std::to_string(version));
  const auto n = r.get<std::uint64_t>();
  const auto flags = r.get<std::uint32_t>();
  if (flags & ~1u) throw FormatError("unknown E3D-PC flags");
  const bool labels = flags & 1u;
  const std::uint64_t per_point = 12 + 3 + (labels ? 4 : 0);
  if (n == 0 || n > r.remaining() / per_point) throw FormatError("scene file truncated or point count invalid");
  if (r.remaining() != n * per_point) throw FormatError("scene file has trailing or missing bytes");

  grid::PointScene s;
  s.positions.resize(n);
  s.colors.resize(n);
  for (auto& p : s.positions) {
    for (double& v : p) v = static_cast<double>(r.get<float>());
  }
  for (auto& c : s.colors) {
    for (double& v : c) v = static_cast<double>(r.get<std::uint8_t>()) / 255.0;
  }
  if (labels) {
    s.instance_labels.emplace(n);
    for (auto& l : *s.instance_labels) l = r.get<std::uint32_t>();
  }
  try {
    s.validate();
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid scene data: ") + e.what());
  }
  return s;
}

void save_scene(const grid::PointScene& scene, const std::filesystem::path& path) {
  const std::string bytes = encode_scene(scene);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw InputError("write failed: " + path.string());
}

grid::PointScene load_scene(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFound("scene file not found: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return decode_scene(ss.str());
}

nlohmann::json scene_to_json(const grid::PointScene& scene) {
  scene.validate();
  nlohmann::json pos = nlohmann::json::array(), col = nlohmann::json::array();
  for (const auto& p : scene.positions) {
    pos.push_back({static_cast<float>(p[0]), static_cast<float>(p[1]), static_cast<float>(p[2])});
  }
  for (const auto& c : scene.colors) col.push_back({color_byte(c[0]), color_byte(c[1]), color_byte(c[2])});
  nlohmann::json j = {{"format", "e3dpc"}, {"version", kSceneVersion}, {"positions", pos}, {"colors", col}};
  if (scene.has_labels()) j["labels"] = *scene.instance_labels;
  return j;
}

grid::PointScene scene_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string()) != "e3dpc") throw FormatError("not an e3dpc JSON scene");
    if (j.value("version", 0u) != kSceneVersion) throw FormatError("unsupported e3dpc JSON version");
    grid::PointScene s;
    for (const auto& p : j.at("positions")) {
      s.positions.push_back({static_cast<double>(p.at(0).get<float>()), static_cast<double>(p.at(1).get<float>()),
                             static_cast<double>(p.at(2).get<float>())});
    }
    for (const auto& c : j.at("colors")) {
      grid::Vec3 v;
      for (int a = 0; a < 3; ++a) {
        const int byte = c.at(static_cast<std::size_t>(a)).get<int>();
        if (byte < 0 || byte > 255) throw FormatError("color byte out of range");
        v[static_cast<std::size_t>(a)] = byte / 255.0;
      }
      s.colors.push_back(v);
    }
    if (j.contains("labels")) s.instance_labels = j.at("labels").get<std::vector<std::uint32_t>>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed e3dpc JSON: ") + e.what());
  } catch (const InputError& e) {
    throw FormatError(std::string("invalid scene data: ") + e.what());
  }
}

std::vector<std::filesystem::path> list_scene_files(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw NotFound("dataset directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == kSceneExtension || ext == ".json")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

grid::PointScene load_scene_any(const std::filesystem::path& path) {
  if (path.extension() == ".json") {
    std::ifstream f(path);
    if (!f) throw NotFound("scene file not found: " + path.string());
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed e3dpc JSON: ") + e.what());
    }
    return scene_from_json(j);
  }
  return load_scene(path);
}

}  // namespace voxclick::data

#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "voxclick/data/generator.hpp"
#include "voxclick/data/scene_io.hpp"
#include "voxclick/sim/clicks.hpp"
#include "voxclick/sim/dataset.hpp"

using namespace voxclick;
using data::SceneRecipe;
using grid::PointScene;

namespace {

bool same_scene(const PointScene& a, const PointScene& b) {
  return a.positions == b.positions && a.colors == b.colors && a.instance_labels == b.instance_labels;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

// Random scene at file precision: f32 positions, u8 colors.
PointScene quantized_cloud(std::mt19937_64& rng, bool labels) {
  std::uniform_int_distribution<std::size_t> n(1, 400);
  auto s = fixture::random_cloud(rng, n(rng), 3.0, 9);
  for (auto& p : s.positions) {
    for (auto& v : p) {
      volatile float f = static_cast<float>(v - 1.5);  // keeps GCC 11 -O3 from eliding the narrowing
      v = f;
    }
  }
  for (auto& c : s.colors) {
    for (auto& v : c) v = static_cast<double>(std::lround(v * 255)) / 255.0;
  }
  if (!labels) s.instance_labels.reset();
  return s;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  SceneRecipe r;
  r.seed = 42;
  CHECK(same_scene(data::generate_scene(r), data::generate_scene(r)));
  CHECK(data::encode_scene(data::generate_scene(r)) == data::encode_scene(data::generate_scene(r)));
  r.seed = 43;
  SceneRecipe r42;
  r42.seed = 42;
  CHECK_FALSE(same_scene(data::generate_scene(r), data::generate_scene(r42)));
  CHECK(data::nth_recipe(r42, 5).seed == 47);
}

TEST_CASE("a one-box recipe yields labels {0, 1}") {
  SceneRecipe r;
  r.seed = 3;
  r.min_objects = r.max_objects = 1;
  r.primitives = {data::Primitive::kBox};
  const auto s = data::generate_scene(r);
  const std::set<std::uint32_t> labels(s.instance_labels->begin(), s.instance_labels->end());
  CHECK(labels == std::set<std::uint32_t>{0, 1});
}

TEST_CASE("audit of 1000 generated scenes") {
  SceneRecipe base;
  base.seed = 10'000;
  std::size_t max_voxels = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    auto r = data::nth_recipe(base, i);
    if (i % 4 == 1) r.wall_height = 0.5;
    const auto s = data::generate_scene(r);
    s.validate();
    std::map<std::uint32_t, int> count;
    for (auto l : *s.instance_labels) ++count[l];
    REQUIRE(count.count(0) == 1);
    CHECK(count.size() >= 2);
    for (const auto& [id, c] : count) {
      if (id != 0) CHECK(c >= 20);
    }
    for (const auto& p : s.positions) {
      CHECK(p[0] >= 0.0);
      CHECK(p[0] <= r.room_extent[0] + 1e-6);
      CHECK(p[1] >= 0.0);
      CHECK(p[1] <= r.room_extent[1] + 1e-6);
      CHECK(p[2] >= -1e-6);
    }
    max_voxels = std::max(max_voxels, grid::voxelize(s, 0.05).scene.size());
    if (i % 50 == 0) {
      for (auto id : grid::instance_ids(s)) CHECK_FALSE(sim::first_click(s, id).fallback);
    }
  }
  CHECK(max_voxels < 50'000);
}

TEST_CASE("recipe validation and JSON round trip") {
  SceneRecipe r;
  r.max_object_size = 2.0;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r = SceneRecipe{};
  r.min_points_per_object = 10;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  r = SceneRecipe{};
  r.min_objects = 0;
  CHECK_THROWS_AS(r.validate(), ConfigError);

  r = SceneRecipe{};
  r.seed = 9;
  r.wall_height = 0.3;
  r.primitives = {data::Primitive::kSphere, data::Primitive::kCylinder};
  const nlohmann::json j = r;
  const auto back = j.get<SceneRecipe>();
  CHECK(nlohmann::json(back) == j);
  CHECK(same_scene(data::generate_scene(back), data::generate_scene(r)));
  CHECK(nlohmann::json::object().get<SceneRecipe>().max_objects == 4);
  CHECK_THROWS_AS(data::primitive_from_string("torus"), ConfigError);
}

TEST_CASE("binary round trip is lossless on 100 random scenes") {
  std::mt19937_64 rng(100);
  const auto dir = temp_dir("voxclick_roundtrip");
  for (int i = 0; i < 100; ++i) {
    const auto s = quantized_cloud(rng, i % 3 != 0);
    const auto back = data::decode_scene(data::encode_scene(s));
    CHECK(same_scene(s, back));
    if (i % 10 == 0) {
      const auto p = dir / ("s" + std::to_string(i) + ".e3dpc");
      data::save_scene(s, p);
      CHECK(same_scene(s, data::load_scene(p)));
      CHECK(std::filesystem::file_size(p) == 20 + s.size() * (15 + (s.has_labels() ? 4 : 0)));
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("generated scenes survive a file round trip unchanged") {
  SceneRecipe r;
  r.seed = 77;
  const auto s = data::generate_scene(r);
  CHECK(same_scene(s, data::decode_scene(data::encode_scene(s))));
  CHECK(same_scene(s, data::scene_from_json(data::scene_to_json(s))));
}

TEST_CASE("label-free files load without labels") {
  std::mt19937_64 rng(4);
  const auto s = quantized_cloud(rng, false);
  const auto back = data::decode_scene(data::encode_scene(s));
  CHECK_FALSE(back.has_labels());
  const auto j = data::scene_to_json(s);
  CHECK_FALSE(j.contains("labels"));
  CHECK_FALSE(data::scene_from_json(j).has_labels());
}

TEST_CASE("damaged files are format errors") {
  std::mt19937_64 rng(6);
  const auto bytes = data::encode_scene(quantized_cloud(rng, true));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{19}, bytes.size() - 1}) {
    CHECK_THROWS_AS(data::decode_scene(std::string_view(bytes).substr(0, cut)), FormatError);
  }
  CHECK_THROWS_AS(data::decode_scene(bytes + "x"), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(data::decode_scene(magic), FormatError);
  auto version = bytes;
  version[4] = 2;
  CHECK_THROWS_AS(data::decode_scene(version), FormatError);
  auto flags = bytes;
  flags[16] = 4;
  CHECK_THROWS_AS(data::decode_scene(flags), FormatError);
  CHECK_THROWS_AS(data::load_scene("/nonexistent/scene.e3dpc"), NotFound);

  nlohmann::json j = data::scene_to_json(quantized_cloud(rng, true));
  j["version"] = 5;
  CHECK_THROWS_AS(data::scene_from_json(j), FormatError);
  j = data::scene_to_json(quantized_cloud(rng, true));
  j["colors"][0][0] = 300;
  CHECK_THROWS_AS(data::scene_from_json(j), FormatError);
}

TEST_CASE("directory listing and dataset loading") {
  const auto dir = temp_dir("voxclick_dataset");
  SceneRecipe r;
  r.seed = 1;
  data::save_scene(data::generate_scene(r), dir / "b.e3dpc");
  r.seed = 2;
  {
    std::ofstream f(dir / "a.json");
    f << data::scene_to_json(data::generate_scene(r)).dump();
  }
  { std::ofstream(dir / "notes.txt") << "ignored"; }
  const auto files = data::list_scene_files(dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.json");
  const auto ds = sim::load_dataset(dir);
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].name == "a");
  CHECK(ds[1].name == "b");
  CHECK_FALSE(ds[0].instances.empty());
  CHECK_THROWS_AS(data::list_scene_files(dir / "missing"), NotFound);
  std::filesystem::remove_all(dir);

  const auto gen = sim::generate_dataset(r, 3, 10);
  REQUIRE(gen.size() == 3);
  CHECK(gen[0].name == "scene_00010");
  CHECK(same_scene(gen[2].points, data::generate_scene(data::nth_recipe(r, 12))));
}

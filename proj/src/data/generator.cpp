#include "voxclick/data/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <spdlog/spdlog.h>

#include "voxclick/errors.hpp"

namespace voxclick::data {

namespace {

using Rng = std::mt19937_64;

struct Placed {
  Primitive kind = Primitive::kBox;
  double cx = 0, cy = 0;
  double radius = 0;      // footprint circumradius
  double half_x = 0, half_y = 0, yaw = 0;  // boxes
  double height = 0;      // boxes, cylinders
};

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

// Out of line: GCC 11 at -O3 vectorizes the three-component version and
// drops the narrowing for x and y.
[[gnu::noinline]] double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

grid::Vec3 quantize_position(double x, double y, double z) { return {to_f32(x), to_f32(y), to_f32(z)}; }

grid::Vec3 noisy_color(const grid::Vec3& base, double noise, Rng& rng) {
  grid::Vec3 c;
  for (int a = 0; a < 3; ++a) {
    const double v = std::clamp(base[a] + uniform(rng, -noise, noise), 0.0, 1.0);
    c[a] = std::round(v * 255.0) / 255.0;
  }
  return c;
}

bool covers_floor(const Placed& p, double x, double y) {
  const double dx = x - p.cx, dy = y - p.cy;
  switch (p.kind) {
    case Primitive::kBox: {
      const double c = std::cos(p.yaw), s = std::sin(p.yaw);
      const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
      return std::abs(lx) <= p.half_x && std::abs(ly) <= p.half_y;
    }
    case Primitive::kSphere:
      return dx * dx + dy * dy <= 0.25 * p.radius * p.radius;
    case Primitive::kCylinder:
      return dx * dx + dy * dy <= p.radius * p.radius;
  }
  return false;
}

double surface_area(const Placed& p) {
  switch (p.kind) {
    case Primitive::kBox:
      return 4 * p.half_x * p.half_y + 4 * p.height * (p.half_x + p.half_y);
    case Primitive::kSphere:
      return 4 * std::numbers::pi * p.radius * p.radius;
    case Primitive::kCylinder:
      return 2 * std::numbers::pi * p.radius * p.height + std::numbers::pi * p.radius * p.radius;
  }
  return 0;
}

grid::Vec3 sample_surface(const Placed& p, Rng& rng) {
  switch (p.kind) {
    case Primitive::kBox: {
      // Top face plus four sides, area weighted; the bottom rests on the floor.
      const double top = 4 * p.half_x * p.half_y;
      const double side_x = 2 * p.half_x * p.height;  // faces normal to local y
      const double side_y = 2 * p.half_y * p.height;
      const double pick = uniform(rng, 0, top + 2 * side_x + 2 * side_y);
      double lx, ly, z;
      if (pick < top) {
        lx = uniform(rng, -p.half_x, p.half_x);
        ly = uniform(rng, -p.half_y, p.half_y);
        z = p.height;
      } else if (pick < top + 2 * side_x) {
        lx = uniform(rng, -p.half_x, p.half_x);
        ly = pick < top + side_x ? -p.half_y : p.half_y;
        z = uniform(rng, 0, p.height);
      } else {
        lx = pick < top + 2 * side_x + side_y ? -p.half_x : p.half_x;
        ly = uniform(rng, -p.half_y, p.half_y);
        z = uniform(rng, 0, p.height);
      }
      const double c = std::cos(p.yaw), s = std::sin(p.yaw);
      return {p.cx + c * lx - s * ly, p.cy + s * lx + c * ly, z};
    }
    case Primitive::kSphere: {
      std::normal_distribution<double> n(0, 1);
      double x, y, z, len;
      do {
        x = n(rng);
        y = n(rng);
        z = n(rng);
        len = std::sqrt(x * x + y * y + z * z);
      } while (len < 1e-9);
      return {p.cx + p.radius * x / len, p.cy + p.radius * y / len, p.radius + p.radius * z / len};
    }
    case Primitive::kCylinder: {
      const double side = 2 * std::numbers::pi * p.radius * p.height;
      const double top = std::numbers::pi * p.radius * p.radius;
      const double theta = uniform(rng, 0, 2 * std::numbers::pi);
      if (uniform(rng, 0, side + top) < side) {
        return {p.cx + p.radius * std::cos(theta), p.cy + p.radius * std::sin(theta), uniform(rng, 0, p.height)};
      }
      const double r = p.radius * std::sqrt(uniform(rng, 0, 1));
      return {p.cx + r * std::cos(theta), p.cy + r * std::sin(theta), p.height};
    }
  }
  return {};
}

void add_point(grid::PointScene& s, const grid::Vec3& pos, const grid::Vec3& color, std::uint32_t label) {
  s.positions.push_back(quantize_position(pos[0], pos[1], pos[2]));
  s.colors.push_back(color);
  s.instance_labels->push_back(label);
}

}  // namespace

std::string to_string(Primitive p) {
  switch (p) {
    case Primitive::kBox:
      return "box";
    case Primitive::kSphere:
      return "sphere";
    case Primitive::kCylinder:
      return "cylinder";
  }
  return "?";
}

Primitive primitive_from_string(const std::string& s) {
  if (s == "box") return Primitive::kBox;
  if (s == "sphere") return Primitive::kSphere;
  if (s == "cylinder") return Primitive::kCylinder;
  throw ConfigError("unknown primitive '" + s + "'");
}

void SceneRecipe::validate() const {
  if (!(room_extent[0] > 0) || !(room_extent[1] > 0)) throw ConfigError("recipe: room extent must be positive");
  if (wall_height < 0) throw ConfigError("recipe: wall_height must be >= 0");
  if (min_objects < 1 || max_objects < min_objects) throw ConfigError("recipe: need 1 <= min_objects <= max_objects");
  if (primitives.empty()) throw ConfigError("recipe: no primitive types");
  if (!(min_object_size > 0) || max_object_size < min_object_size) throw ConfigError("recipe: bad object size range");
  if (max_object_size >= std::min(room_extent[0], room_extent[1])) {
    throw ConfigError("recipe: objects must be smaller than the room");
  }
  if (min_points_per_object < 20 || max_points_per_object < min_points_per_object) {
    throw ConfigError("recipe: points per object range must satisfy 20 <= min <= max");
  }
  if (!(object_density > 0) || !(background_density > 0)) throw ConfigError("recipe: densities must be positive");
  if (palette.empty()) throw ConfigError("recipe: empty palette");
  if (color_noise < 0) throw ConfigError("recipe: color_noise must be >= 0");
}

void to_json(nlohmann::json& j, const SceneRecipe& r) {
  std::vector<std::string> prims;
  for (auto p : r.primitives) prims.push_back(to_string(p));
  j = {{"seed", r.seed},
       {"room_extent", r.room_extent},
       {"wall_height", r.wall_height},
       {"min_objects", r.min_objects},
       {"max_objects", r.max_objects},
       {"primitives", prims},
       {"min_object_size", r.min_object_size},
       {"max_object_size", r.max_object_size},
       {"min_points_per_object", r.min_points_per_object},
       {"max_points_per_object", r.max_points_per_object},
       {"object_density", r.object_density},
       {"background_density", r.background_density},
       {"color_noise", r.color_noise},
       {"palette", r.palette},
       {"floor_color", r.floor_color},
       {"wall_color", r.wall_color}};
}

void from_json(const nlohmann::json& j, SceneRecipe& r) {
  r = SceneRecipe{};
  r.seed = j.value("seed", r.seed);
  r.room_extent = j.value("room_extent", r.room_extent);
  r.wall_height = j.value("wall_height", r.wall_height);
  r.min_objects = j.value("min_objects", r.min_objects);
  r.max_objects = j.value("max_objects", r.max_objects);
  if (j.contains("primitives")) {
    r.primitives.clear();
    for (const auto& p : j.at("primitives")) r.primitives.push_back(primitive_from_string(p.get<std::string>()));
  }
  r.min_object_size = j.value("min_object_size", r.min_object_size);
  r.max_object_size = j.value("max_object_size", r.max_object_size);
  r.min_points_per_object = j.value("min_points_per_object", r.min_points_per_object);
  r.max_points_per_object = j.value("max_points_per_object", r.max_points_per_object);
  r.object_density = j.value("object_density", r.object_density);
  r.background_density = j.value("background_density", r.background_density);
  r.color_noise = j.value("color_noise", r.color_noise);
  r.palette = j.value("palette", r.palette);
  r.floor_color = j.value("floor_color", r.floor_color);
  r.wall_color = j.value("wall_color", r.wall_color);
}

SceneRecipe nth_recipe(const SceneRecipe& base, std::uint64_t index) {
  SceneRecipe r = base;
  r.seed = base.seed + index;
  return r;
}

grid::PointScene generate_scene(const SceneRecipe& recipe) {
  recipe.validate();
  Rng rng(recipe.seed);
  const double ex = recipe.room_extent[0], ey = recipe.room_extent[1];
  constexpr double kGap = 0.05;
  constexpr int kRetries = 100;

  const int wanted = std::uniform_int_distribution<int>(recipe.min_objects, recipe.max_objects)(rng);
  std::vector<Placed> placed;
  for (int k = 0; k < wanted; ++k) {
    Placed p;
    p.kind = recipe.primitives[std::uniform_int_distribution<std::size_t>(0, recipe.primitives.size() - 1)(rng)];
    const double size = uniform(rng, recipe.min_object_size, recipe.max_object_size);
    switch (p.kind) {
      case Primitive::kBox:
        p.half_x = 0.5 * size;
        p.half_y = 0.5 * size * uniform(rng, 0.6, 1.0);
        p.yaw = uniform(rng, 0, std::numbers::pi / 2);
        p.height = uniform(rng, 0.10, 0.35);
        p.radius = std::hypot(p.half_x, p.half_y);
        break;
      case Primitive::kSphere:
        p.radius = 0.5 * size;
        p.height = size;
        break;
      case Primitive::kCylinder:
        p.radius = 0.5 * size;
        p.height = uniform(rng, 0.10, 0.40);
        break;
    }
    bool ok = false;
    for (int attempt = 0; attempt < kRetries && !ok; ++attempt) {
      if (2 * p.radius >= std::min(ex, ey)) break;
      p.cx = uniform(rng, p.radius, ex - p.radius);
      p.cy = uniform(rng, p.radius, ey - p.radius);
      ok = std::all_of(placed.begin(), placed.end(), [&](const Placed& q) {
        return std::hypot(p.cx - q.cx, p.cy - q.cy) > p.radius + q.radius + kGap;
      });
    }
    if (ok) {
      placed.push_back(p);
    } else {
      spdlog::info("generate_scene(seed {}): no free spot for object {} of {}; placing fewer", recipe.seed, k + 1,
                   wanted);
    }
  }
  if (placed.empty()) throw InputError("generate_scene: could not place any object");

  grid::PointScene scene;
  scene.instance_labels.emplace();

  const auto floor_points = static_cast<long>(std::llround(recipe.background_density * ex * ey));
  for (long i = 0; i < floor_points; ++i) {
    const double x = uniform(rng, 0, ex), y = uniform(rng, 0, ey);
    const grid::Vec3 color = noisy_color(recipe.floor_color, recipe.color_noise, rng);
    if (std::any_of(placed.begin(), placed.end(), [&](const Placed& p) { return covers_floor(p, x, y); })) continue;
    add_point(scene, {x, y, 0.0}, color, 0);
  }
  if (recipe.wall_height > 0) {
    const auto wall_x = static_cast<long>(std::llround(recipe.background_density * ex * recipe.wall_height));
    const auto wall_y = static_cast<long>(std::llround(recipe.background_density * ey * recipe.wall_height));
    for (long i = 0; i < wall_x; ++i) {
      const double x = uniform(rng, 0, ex), z = uniform(rng, 0, recipe.wall_height);
      add_point(scene, {x, 0.0, z}, noisy_color(recipe.wall_color, recipe.color_noise, rng), 0);
    }
    for (long i = 0; i < wall_y; ++i) {
      const double y = uniform(rng, 0, ey), z = uniform(rng, 0, recipe.wall_height);
      add_point(scene, {0.0, y, z}, noisy_color(recipe.wall_color, recipe.color_noise, rng), 0);
    }
  }

  std::vector<std::size_t> colors(recipe.palette.size());
  for (std::size_t i = 0; i < colors.size(); ++i) colors[i] = i;
  std::shuffle(colors.begin(), colors.end(), rng);
  for (std::size_t k = 0; k < placed.size(); ++k) {
    const Placed& p = placed[k];
    const grid::Vec3& base = recipe.palette[colors[k % colors.size()]];
    const double want = surface_area(p) * recipe.object_density;
    const auto n = static_cast<long>(std::clamp(std::llround(want), static_cast<long long>(recipe.min_points_per_object),
                                                static_cast<long long>(recipe.max_points_per_object)));
    for (long i = 0; i < n; ++i) {
      const grid::Vec3 pos = sample_surface(p, rng);
      add_point(scene, pos, noisy_color(base, recipe.color_noise, rng), static_cast<std::uint32_t>(k + 1));
    }
  }
  return scene;
}

}  // namespace voxclick::data

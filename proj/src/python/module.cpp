#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "voxclick/data/generator.hpp"
#include "voxclick/data/scene_io.hpp"
#include "voxclick/errors.hpp"
#include "voxclick/eval/bench.hpp"
#include "voxclick/grid/scene.hpp"
#include "voxclick/model/model.hpp"
#include "voxclick/serve/rle.hpp"
#include "voxclick/serve/session.hpp"
#include "voxclick/sim/clicks.hpp"
#include "voxclick/sim/trainer.hpp"

namespace py = pybind11;
using namespace voxclick;
using nlohmann::json;
using FloatArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using ModelF = model::Model<float>;

namespace {

std::vector<grid::Vec3> rows3(const FloatArray& a, const char* what) {
  if (a.ndim() != 2 || a.shape(1) != 3) throw InputError(std::string(what) + " must have shape (n, 3)");
  std::vector<grid::Vec3> out(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<std::size_t>(i)] = {r(i, 0), r(i, 1), r(i, 2)};
  return out;
}

py::array_t<double> to_array(const std::vector<grid::Vec3>& v) {
  py::array_t<double> out({static_cast<py::ssize_t>(v.size()), py::ssize_t{3}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int a = 0; a < 3; ++a) w(static_cast<py::ssize_t>(i), a) = v[i][a];
  }
  return out;
}

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

grid::Mask to_mask(const MaskArray& a) {
  if (a.ndim() != 1) throw InputError("mask must be one-dimensional");
  return {a.data(), a.data() + a.size()};
}

grid::PointScene make_scene(const FloatArray& positions, const std::optional<FloatArray>& colors,
                            const std::optional<py::array_t<std::uint32_t, py::array::forcecast>>& labels) {
  grid::PointScene s;
  s.positions = rows3(positions, "positions");
  s.colors = colors ? rows3(*colors, "colors") : std::vector<grid::Vec3>(s.positions.size(), {0.5, 0.5, 0.5});
  if (s.colors.size() != s.positions.size()) throw InputError("colors and positions differ in length");
  if (labels) {
    if (labels->ndim() != 1 || static_cast<std::size_t>(labels->size()) != s.positions.size()) {
      throw InputError("instance_labels must have one entry per point");
    }
    s.instance_labels.emplace(labels->data(), labels->data() + labels->size());
  }
  return s;
}

model::ClickSet parse_clicks(const std::vector<std::tuple<double, double, double, bool>>& clicks, std::size_t cap) {
  model::ClickSet c(cap);
  for (const auto& [x, y, z, positive] : clicks) {
    c.push({{x, y, z}, positive ? model::ClickLabel::kPositive : model::ClickLabel::kNegative, static_cast<int>(c.size())});
  }
  return c;
}

std::vector<sim::LabeledScene> labeled(const std::vector<grid::PointScene>& scenes, double voxel) {
  std::vector<sim::LabeledScene> out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    out.push_back(sim::prepare_labeled_scene(scenes[i], voxel, "scene_" + std::to_string(i)));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Interactive click-prompted 3D instance segmentation";
  m.attr("__version__") = VOXCLICK_VERSION;
  m.attr("DEFAULT_VOXEL_SIZE") = grid::kDefaultVoxelSize;

  auto base = py::register_exception<std::runtime_error>(m, "VoxclickError", PyExc_RuntimeError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<NotFound>(m, "NotFound", PyExc_LookupError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_AssertionError);
  (void)base;

  py::class_<grid::PointScene>(m, "Scene")
      .def(py::init(&make_scene), py::arg("positions"), py::arg("colors") = py::none(),
           py::arg("instance_labels") = py::none())
      .def_static("load", &data::load_scene_any, py::arg("path"))
      .def("save", [](const grid::PointScene& s, const std::filesystem::path& p) { data::save_scene(s, p); })
      .def("to_bytes", [](const grid::PointScene& s) { return py::bytes(data::encode_scene(s)); })
      .def_static("from_bytes", [](const py::bytes& b) { return data::decode_scene(std::string(b)); })
      .def("__len__", &grid::PointScene::size)
      .def_property_readonly("positions", [](const grid::PointScene& s) { return to_array(s.positions); })
      .def_property_readonly("colors", [](const grid::PointScene& s) { return to_array(s.colors); })
      .def_property_readonly("instance_labels",
                             [](const grid::PointScene& s) -> std::optional<py::array_t<std::uint32_t>> {
                               if (!s.instance_labels) return std::nullopt;
                               return to_array(*s.instance_labels);
                             })
      .def("instance_ids", &grid::instance_ids)
      .def("instance_mask", [](const grid::PointScene& s, std::uint32_t id) { return to_array(grid::instance_point_mask(s, id)); });

  m.def(
      "generate_scene",
      [](const std::string& recipe_json) {
        return data::generate_scene(json::parse(recipe_json).get<data::SceneRecipe>());
      },
      py::arg("recipe_json") = "{}", "Synthetic labeled room from a recipe given as JSON");
  m.def(
      "nth_recipe",
      [](const std::string& recipe_json, std::uint64_t i) {
        return json(data::nth_recipe(json::parse(recipe_json).get<data::SceneRecipe>(), i)).dump();
      },
      py::arg("recipe_json"), py::arg("index"));

  m.def(
      "voxelize",
      [](const grid::PointScene& s, double res) {
        const auto v = grid::voxelize(s, res);
        py::array_t<std::int32_t> coords({static_cast<py::ssize_t>(v.scene.size()), py::ssize_t{3}});
        auto w = coords.mutable_unchecked<2>();
        for (std::size_t i = 0; i < v.scene.size(); ++i) {
          const auto& c = v.scene.coords[i];
          w(static_cast<py::ssize_t>(i), 0) = c.x;
          w(static_cast<py::ssize_t>(i), 1) = c.y;
          w(static_cast<py::ssize_t>(i), 2) = c.z;
        }
        py::dict out;
        out["coords"] = coords;
        out["colors"] = to_array(v.scene.colors);
        out["point_to_voxel"] = to_array(v.map.point_to_voxel);
        out["origin"] = py::make_tuple(v.scene.origin[0], v.scene.origin[1], v.scene.origin[2]);
        return out;
      },
      py::arg("scene"), py::arg("resolution") = grid::kDefaultVoxelSize);

  m.def(
      "first_click",
      [](const grid::PointScene& s, std::uint32_t id) {
        const auto fc = sim::first_click(s, id);
        return py::make_tuple(fc.point_index, py::make_tuple(fc.click.position[0], fc.click.position[1], fc.click.position[2]));
      },
      py::arg("scene"), py::arg("instance_id"), "Point index and position of the simulated first click");

  m.def("encode_runs", [](const MaskArray& mask) { return serve::encode_runs(to_mask(mask)); }, py::arg("mask"));
  m.def(
      "decode_runs", [](std::uint64_t n, const std::vector<std::uint64_t>& runs) { return to_array(serve::decode_runs(n, runs)); },
      py::arg("n"), py::arg("runs"));

  py::class_<ModelF, std::shared_ptr<ModelF>>(m, "Model")
      .def(py::init([](const std::string& config_json) {
             const json j = json::parse(config_json);
             return std::make_shared<ModelF>(j.empty() ? model::ModelConfig::desk() : j.get<model::ModelConfig>());
           }),
           py::arg("config_json") = "{}")
      .def_static("load", [](const std::filesystem::path& p) { return std::make_shared<ModelF>(ModelF::load(p)); })
      .def("save", &ModelF::save, py::arg("path"))
      .def_property_readonly("config_json", [](const ModelF& mdl) { return json(mdl.config()).dump(); })
      .def_property_readonly("parameter_count", [](const ModelF& mdl) { return mdl.parameters().scalar_count(); })
      .def(
          "segment",
          [](const ModelF& mdl, const grid::PointScene& s,
             const std::vector<std::tuple<double, double, double, bool>>& clicks) {
            serve::SceneStore store;
            const auto stored = store.add("scene", s, mdl.config().voxel_size);
            const auto cs = parse_clicks(clicks, static_cast<std::size_t>(mdl.config().prompt.max_clicks));
            grid::Mask mask;
            {
              py::gil_scoped_release release;
              mask = serve::pipeline_mask(mdl, *stored, cs);
            }
            return to_array(mask);
          },
          py::arg("scene"), py::arg("clicks"), "Point mask for clicks given as (x, y, z, positive) tuples");

  m.def(
      "train",
      [](ModelF& mdl, const std::vector<grid::PointScene>& scenes, const std::string& config_json) {
        const auto cfg = json::parse(config_json).get<sim::TrainConfig>();
        const auto data = labeled(scenes, mdl.config().voxel_size);
        sim::TrainResult r;
        {
          py::gil_scoped_release release;
          r = sim::train(mdl, data, cfg);
        }
        std::vector<double> losses;
        for (const auto& e : r.curve) losses.push_back(e.mean_loss);
        return losses;
      },
      py::arg("model"), py::arg("scenes"), py::arg("config_json") = "{}", "Per-epoch mean losses");

  m.def(
      "evaluate",
      [](const ModelF& mdl, const std::vector<grid::PointScene>& scenes, int max_clicks) {
        const auto data = labeled(scenes, mdl.config().voxel_size);
        eval::EvalReport rep;
        {
          py::gil_scoped_release release;
          rep = eval::evaluate(mdl, data, max_clicks, "python");
        }
        py::dict out;
        out["mean_iou"] = rep.mean_iou();
        out["instances"] = rep.instances.size();
        out["csv"] = rep.to_csv();
        out["markdown"] = rep.to_markdown();
        return out;
      },
      py::arg("model"), py::arg("scenes"), py::arg("max_clicks") = 10);
}

// voxclick command line: gen, train, eval, ablate, serve, info.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "voxclick/data/generator.hpp"
#include "voxclick/data/scene_io.hpp"
#include "voxclick/eval/bench.hpp"
#include "voxclick/serve/http.hpp"
#include "voxclick/sim/dataset.hpp"
#include "voxclick/sim/trainer.hpp"

namespace fs = std::filesystem;
using namespace voxclick;

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw NotFound("cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

serve::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"voxclick: click-prompted 3D instance segmentation"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  // gen
  auto* gen = app.add_subcommand("gen", "Generate labeled synthetic scenes");
  fs::path recipe_path, gen_out;
  std::size_t gen_count = 1;
  std::uint64_t gen_first = 0;
  std::string gen_format = "e3dpc";
  gen->add_option("--recipe", recipe_path, "Recipe JSON file (defaults apply to missing keys)");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", gen_count, "Number of scenes")->check(CLI::PositiveNumber);
  gen->add_option("--first", gen_first, "Index of the first scene (seed offset)");
  gen->add_option("--format", gen_format, "e3dpc or json")->check(CLI::IsMember({"e3dpc", "json"}));

  // train
  auto* train = app.add_subcommand("train", "Train a model with simulated clicks");
  fs::path train_config, train_out, train_dataset;
  train->add_option("--config", train_config, "Training config JSON")->required();
  train->add_option("--dataset", train_dataset, "Override the config's dataset directory");
  train->add_option("--out", train_out, "Override the output directory");

  // eval
  auto* ev = app.add_subcommand("eval", "IoU@k evaluation with simulated clicks");
  fs::path eval_ckpt, eval_dataset, eval_out;
  int eval_clicks = 10;
  ev->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  ev->add_option("--dataset", eval_dataset, "Directory of labeled scenes")->required();
  ev->add_option("--clicks", eval_clicks, "Clicks per instance (N_C)")->check(CLI::PositiveNumber);
  ev->add_option("--out", eval_out, "Report prefix; writes <prefix>.csv and <prefix>.md")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "Fusion x negative-embedding comparison table");
  fs::path ab_dataset, ab_out;
  std::vector<std::string> ab_cells;
  ab->add_option("--dataset", ab_dataset, "Directory of labeled scenes")->required();
  ab->add_option("--cell", ab_cells, "label=checkpoint, label in explicit, explicit+neg, implicit, implicit+neg");
  ab->add_option("--out", ab_out, "Table prefix; writes <prefix>.csv and <prefix>.md")->required();

  // serve
  auto* sv = app.add_subcommand("serve", "Interactive session service over HTTP");
  std::string sv_host = env_or("VOXCLICK_HOST", "127.0.0.1");
  int sv_port = std::atoi(env_or("VOXCLICK_PORT", "8765").c_str());
  fs::path sv_model = env_or("VOXCLICK_MODEL", ""), sv_scenes = env_or("VOXCLICK_SCENES", "");
  sv->add_option("--host", sv_host, "Bind address (env VOXCLICK_HOST)");
  sv->add_option("--port", sv_port, "Port, 0 = any (env VOXCLICK_PORT)");
  sv->add_option("--model", sv_model, "Checkpoint served as model 'default' (env VOXCLICK_MODEL)");
  sv->add_option("--scenes", sv_scenes, "Scene directory (env VOXCLICK_SCENES)");

  // info
  auto* info = app.add_subcommand("info", "Print a checkpoint's config and parameter count");
  fs::path info_ckpt;
  info->add_option("checkpoint", info_ckpt)->required();

  CLI11_PARSE(app, argc, argv);
  if (quiet) spdlog::set_level(spdlog::level::warn);

  try {
    if (*gen) {
      data::SceneRecipe recipe;
      if (!recipe_path.empty()) recipe = read_json(recipe_path).get<data::SceneRecipe>();
      fs::create_directories(gen_out);
      for (std::size_t i = 0; i < gen_count; ++i) {
        const std::uint64_t index = gen_first + i;
        const auto scene = data::generate_scene(data::nth_recipe(recipe, index));
        const std::string stem = fmt::format("scene_{:05d}", index);
        if (gen_format == "json") {
          std::ofstream(gen_out / (stem + ".json")) << data::scene_to_json(scene).dump();
        } else {
          data::save_scene(scene, gen_out / (stem + data::kSceneExtension));
        }
      }
      spdlog::info("wrote {} scenes to {}", gen_count, gen_out.string());
    } else if (*train) {
      const nlohmann::json cfg = read_json(train_config);
      const model::ModelConfig mc = cfg.value("model", nlohmann::json::object()).get<model::ModelConfig>();
      sim::TrainConfig tc = cfg.value("train", nlohmann::json::object()).get<sim::TrainConfig>();
      if (!train_out.empty()) tc.out_dir = train_out;
      if (tc.out_dir.empty()) throw ConfigError("train: no output directory (config train.out_dir or --out)");
      fs::path dataset = train_dataset.empty() ? fs::path(cfg.value("dataset", std::string())) : train_dataset;
      if (dataset.empty()) throw ConfigError("train: no dataset (config 'dataset' or --dataset)");
      const auto scenes = sim::load_dataset(dataset, mc.voxel_size);
      model::Model<float> m(mc);
      spdlog::info("training on {} scenes, {} parameters", scenes.size(), m.parameters().scalar_count());
      sim::train(m, scenes, tc);
    } else if (*ev) {
      const auto m = model::Model<float>::load(eval_ckpt);
      const auto scenes = sim::load_dataset(eval_dataset, m.config().voxel_size);
      const auto report = eval::evaluate(m, scenes, eval_clicks, eval_ckpt.filename().string());
      eval::write_report(report, eval_out);
      const auto means = report.mean_iou();
      std::cout << "instances " << report.instances.size() << ", IoU@1 " << fmt::format("{:.4f}", means.front())
                << ", IoU@" << eval_clicks << " " << fmt::format("{:.4f}", means.back()) << "\n";
    } else if (*ab) {
      std::vector<eval::AblationCell> cells;
      for (const auto& label : eval::ablation_labels()) cells.push_back({label, std::nullopt});
      for (const auto& spec : ab_cells) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("--cell expects label=checkpoint, got '" + spec + "'");
        const std::string label = spec.substr(0, eq);
        auto it = std::find_if(cells.begin(), cells.end(), [&](const auto& c) { return c.label == label; });
        if (it == cells.end()) throw ConfigError("unknown ablation label '" + label + "'");
        it->checkpoint = fs::path(spec.substr(eq + 1));
      }
      const auto scenes = sim::load_dataset(ab_dataset);
      const auto table = eval::run_ablation(cells, scenes);
      if (ab_out.has_parent_path()) fs::create_directories(ab_out.parent_path());
      std::ofstream(ab_out.string() + ".csv") << table.to_csv();
      std::ofstream(ab_out.string() + ".md") << table.to_markdown();
      std::cout << table.to_markdown();
    } else if (*sv) {
      if (sv_model.empty()) throw ConfigError("serve: --model (or VOXCLICK_MODEL) is required");
      if (sv_scenes.empty()) throw ConfigError("serve: --scenes (or VOXCLICK_SCENES) is required");
      auto models = std::make_shared<serve::ModelStore>();
      auto m = std::make_shared<const model::Model<float>>(model::Model<float>::load(sv_model));
      const double voxel = m->config().voxel_size;
      models->add("default", m);
      auto scenes = std::make_shared<serve::SceneStore>();
      const std::size_t n = scenes->load_directory(sv_scenes, voxel);
      spdlog::info("loaded {} scenes from {}", n, sv_scenes.string());
      auto service = std::make_shared<serve::SessionService>(scenes, models);
      serve::HttpOptions opts;
      opts.host = sv_host;
      opts.port = sv_port;
      serve::HttpServer server(service, opts);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      server.run();
      g_server = nullptr;
    } else if (*info) {
      const auto ckpt = diff::load_checkpoint(info_ckpt);
      const auto m = model::Model<float>::from_checkpoint(ckpt);
      std::cout << ckpt.config.dump(2) << "\nparameters: " << m.parameters().scalar_count() << "\n";
    }
  } catch (const ContractViolation& e) {
    spdlog::error("contract violation: {}", e.what());
    return 3;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

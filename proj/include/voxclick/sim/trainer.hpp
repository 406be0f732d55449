#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxclick/grid/scene.hpp"
#include "voxclick/model/model.hpp"
#include "voxclick/sim/clicks.hpp"

namespace voxclick::sim {

struct RolloutConfig {
  int max_clicks = 10;
  double dice_weight = 1.0;
  double ce_weight = 1.0;

  void validate() const;
};

// A point scene with everything the click protocol needs precomputed.
struct LabeledScene {
  std::string name;
  grid::PointScene points;
  grid::Voxelized voxels;
  grid::Bounds bounds;  // of the voxel centers; prompt normalization frame
  std::vector<std::uint32_t> instances;
  std::map<std::uint32_t, grid::Mask> voxel_truth;
  std::map<std::uint32_t, FirstClick> first_clicks;
};

LabeledScene prepare_labeled_scene(grid::PointScene points, double voxel_size = grid::kDefaultVoxelSize,
                                   std::string name = {});

struct RolloutResult {
  double total_loss = 0;  // sum of per-click losses / clicks_used
  int clicks_used = 0;
  bool converged = false;
  std::vector<double> click_losses;
  std::vector<model::Click> clicks;
};

// Simulated-user rollout on one instance with a single backward pass on the
// normalized total. Gradients accumulate into the model's parameters.
template <typename T>
RolloutResult rollout_and_train_step(const model::Model<T>& model, const LabeledScene& scene, std::uint32_t instance_id,
                                     const RolloutConfig& cfg);

struct TrainConfig {
  int epochs = 200;
  double lr0 = 1e-4;
  double poly_power = 0.9;
  double weight_decay = 0.05;
  int batch = 4;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // epochs; 0 = only the final checkpoint
  std::filesystem::path out_dir;  // empty = keep everything in memory
  RolloutConfig rollout;

  // Full-scale schedule.
  static TrainConfig full();
  // Schedule that fits a laptop CPU on the synthetic data.
  static TrainConfig desk();

  void validate() const;
};

void to_json(nlohmann::json& j, const RolloutConfig& c);
void from_json(const nlohmann::json& j, RolloutConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0;
  double mean_clicks = 0;
  double lr = 0;  // at the epoch's last step
  double seconds = 0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  long steps = 0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Each epoch visits every scene once in a seeded order, with one randomly
// chosen instance per visit; `batch` rollouts share one optimizer step.
TrainResult train(model::Model<float>& model, const std::vector<LabeledScene>& dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

void write_loss_curve(const TrainResult& result, const std::filesystem::path& path);

}  // namespace voxclick::sim

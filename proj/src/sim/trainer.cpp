#include "voxclick/sim/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "voxclick/diff/ops.hpp"
#include "voxclick/diff/optim.hpp"
#include "voxclick/sim/losses.hpp"

namespace voxclick::sim {

void RolloutConfig::validate() const {
  if (max_clicks < 1) throw ConfigError("rollout: max_clicks must be >= 1");
  if (!(dice_weight >= 0) || !(ce_weight >= 0)) throw ConfigError("rollout: loss weights must be >= 0");
}

LabeledScene prepare_labeled_scene(grid::PointScene points, double voxel_size, std::string name) {
  points.validate();
  if (!points.has_labels()) throw InputError("prepare_labeled_scene: scene has no instance labels");
  LabeledScene s;
  s.name = std::move(name);
  s.voxels = grid::voxelize(points, voxel_size);
  s.bounds = model::SceneEncoder<float>::voxel_bounds(s.voxels.scene);
  s.instances = grid::instance_ids(points);
  for (auto id : s.instances) {
    s.voxel_truth.emplace(id, grid::transfer_instance_label(points, s.voxels.map, id));
    s.first_clicks.emplace(id, first_click(points, id));
  }
  s.points = std::move(points);
  return s;
}

template <typename T>
RolloutResult rollout_and_train_step(const model::Model<T>& model, const LabeledScene& scene, std::uint32_t instance_id,
                                     const RolloutConfig& cfg) {
  cfg.validate();
  const auto truth_it = scene.voxel_truth.find(instance_id);
  if (truth_it == scene.voxel_truth.end()) {
    throw InputError("rollout: instance " + std::to_string(instance_id) + " not in scene '" + scene.name + "'");
  }
  const grid::Mask& truth = truth_it->second;

  const model::SceneContext<T> ctx = model.prepare(scene.voxels.scene, scene.bounds);
  model::ClickSet clicks(static_cast<std::size_t>(cfg.max_clicks));
  clicks.push(scene.first_clicks.at(instance_id).click);

  RolloutResult out;
  std::optional<diff::Tensor<T>> total;
  for (int i = 1; i <= cfg.max_clicks; ++i) {
    const model::Prediction<T> pred = model.predict(ctx, clicks);
    const diff::Tensor<T>& logits = pred.fused.logits;
    const diff::Tensor<T> loss = diff::add(diff::scale(dice_loss(logits, truth), static_cast<T>(cfg.dice_weight)),
                                           diff::scale(bce_with_logits(logits, truth), static_cast<T>(cfg.ce_weight)));
    out.click_losses.push_back(static_cast<double>(loss.item()));
    total = total ? diff::add(*total, loss) : loss;
    out.clicks_used = i;
    if (i == cfg.max_clicks) break;
    const NextClick next = next_click(pred.fused.mask, truth, scene.voxels.scene);
    if (next.converged) {
      out.converged = true;
      break;
    }
    clicks.push(next.click);
  }
  out.clicks.assign(clicks.begin(), clicks.end());
  const diff::Tensor<T> normalized = diff::scale(*total, static_cast<T>(1.0 / out.clicks_used));
  out.total_loss = static_cast<double>(normalized.item());
  if (!std::isfinite(out.total_loss)) throw NumericError("rollout: non-finite loss");
  normalized.backward();
  return out;
}

template RolloutResult rollout_and_train_step(const model::Model<float>&, const LabeledScene&, std::uint32_t,
                                              const RolloutConfig&);
template RolloutResult rollout_and_train_step(const model::Model<double>&, const LabeledScene&, std::uint32_t,
                                              const RolloutConfig&);

TrainConfig TrainConfig::full() {
  TrainConfig c;
  c.epochs = 1000;
  c.lr0 = 1e-4;
  c.batch = 8;
  return c;
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.epochs = 200;
  c.lr0 = 1e-3;  // the small model barely moves at 1e-4 in 200 epochs
  c.batch = 4;
  return c;
}

void TrainConfig::validate() const {
  rollout.validate();
  if (epochs < 1 || batch < 1) throw ConfigError("train: epochs and batch must be >= 1");
  if (!(lr0 > 0) || !(poly_power > 0) || !(weight_decay >= 0)) {
    throw ConfigError("train: lr0 and poly_power must be > 0, weight_decay >= 0");
  }
  if (checkpoint_every < 0) throw ConfigError("train: checkpoint_every must be >= 0");
}

void to_json(nlohmann::json& j, const RolloutConfig& c) {
  j = {{"max_clicks", c.max_clicks}, {"dice_weight", c.dice_weight}, {"ce_weight", c.ce_weight}};
}

void from_json(const nlohmann::json& j, RolloutConfig& c) {
  c = RolloutConfig{};
  c.max_clicks = j.value("max_clicks", c.max_clicks);
  c.dice_weight = j.value("dice_weight", c.dice_weight);
  c.ce_weight = j.value("ce_weight", c.ce_weight);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"lr0", c.lr0},
       {"poly_power", c.poly_power},
       {"weight_decay", c.weight_decay},
       {"batch", c.batch},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"out_dir", c.out_dir.string()},
       {"rollout", c.rollout}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = j.value("preset", std::string("desk")) == "full" ? TrainConfig::full() : TrainConfig::desk();
  c.epochs = j.value("epochs", c.epochs);
  c.lr0 = j.value("lr0", c.lr0);
  c.poly_power = j.value("poly_power", c.poly_power);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.batch = j.value("batch", c.batch);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.out_dir = j.value("out_dir", c.out_dir.string());
  if (j.contains("rollout")) c.rollout = j.at("rollout").get<RolloutConfig>();
}

TrainResult train(model::Model<float>& model, const std::vector<LabeledScene>& dataset, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.empty()) throw InputError("train: empty dataset");
  for (const auto& s : dataset) {
    if (s.instances.empty()) throw InputError("train: scene '" + s.name + "' has no instances");
  }
  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

  diff::AdamWConfig opt_cfg;
  opt_cfg.weight_decay = cfg.weight_decay;
  diff::AdamW<float> optimizer(opt_cfg);
  diff::Rng rng(cfg.seed);

  const long steps_per_epoch = (static_cast<long>(dataset.size()) + cfg.batch - 1) / cfg.batch;
  const long total_steps = steps_per_epoch * cfg.epochs;
  TrainResult result;
  std::vector<std::size_t> order(dataset.size());

  auto save = [&](const std::string& stem) {
    if (cfg.out_dir.empty()) return;
    model.save(cfg.out_dir / (stem + ".vxck"));
  };

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0, click_sum = 0;
    double lr = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch));
      model.parameters().zero_grad();
      for (std::size_t b = begin; b < end; ++b) {
        const LabeledScene& scene = dataset[order[b]];
        std::uniform_int_distribution<std::size_t> pick(0, scene.instances.size() - 1);
        const std::uint32_t instance = scene.instances[pick(rng)];
        RolloutResult r;
        try {
          r = rollout_and_train_step(model, scene, instance, cfg.rollout);
        } catch (const NumericError& e) {
          throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(result.steps) + " (scene '" + scene.name + "', instance " +
                             std::to_string(instance) + "): " + e.what());
        }
        loss_sum += r.total_loss;
        click_sum += r.clicks_used;
      }
      lr = diff::poly_lr(cfg.lr0, static_cast<double>(result.steps), static_cast<double>(total_steps), cfg.poly_power);
      optimizer.step(model.parameters(), lr, 1.0 / static_cast<double>(end - begin));
      ++result.steps;
    }
    EpochStats st;
    st.epoch = epoch;
    st.mean_loss = loss_sum / static_cast<double>(dataset.size());
    st.mean_clicks = click_sum / static_cast<double>(dataset.size());
    st.lr = lr;
    st.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(st.mean_loss)) throw NumericError("training diverged: epoch " + std::to_string(epoch));
    result.curve.push_back(st);
    spdlog::info("epoch {}/{} loss {:.4f} clicks {:.2f} lr {:.3g} ({:.1f}s)", epoch, cfg.epochs, st.mean_loss,
                 st.mean_clicks, st.lr, st.seconds);
    if (on_epoch) on_epoch(st);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch != cfg.epochs) {
      save("epoch_" + std::to_string(epoch));
    }
  }
  save("final");
  if (!cfg.out_dir.empty()) write_loss_curve(result, cfg.out_dir / "loss_curve.csv");
  return result;
}

void write_loss_curve(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << "epoch,mean_loss,mean_clicks,lr,seconds\n";
  f << std::setprecision(8);
  for (const auto& e : result.curve) {
    f << e.epoch << ',' << e.mean_loss << ',' << e.mean_clicks << ',' << e.lr << ',' << e.seconds << '\n';
  }
}

}  // namespace voxclick::sim

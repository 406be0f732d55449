#include "voxclick/eval/bench.hpp"

#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "voxclick/diff/tensor.hpp"

namespace voxclick::eval {

double iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt) {
  if (pred.size() != gt.size()) throw ContractViolation("iou: mask length mismatch");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, g = gt[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

ModelSegmenter::ModelSegmenter(const model::Model<float>& model, std::string checkpoint_id)
    : model_(model), checkpoint_id_(std::move(checkpoint_id)) {}

void ModelSegmenter::begin_scene(const sim::LabeledScene& scene) {
  const diff::NoGradGuard no_grad;
  context_ = model_.prepare(scene.voxels.scene, scene.bounds);
}

grid::Mask ModelSegmenter::predict(const model::ClickSet& clicks) {
  if (!context_) throw ContractViolation("ModelSegmenter::predict before begin_scene");
  const diff::NoGradGuard no_grad;
  return model_.predict(*context_, clicks).fused.mask;
}

nlohmann::json ModelSegmenter::fingerprint() const {
  const auto& c = model_.config();
  return {{"checkpoint", checkpoint_id_},
          {"fusion", model::to_string(c.fusion.mode)},
          {"negative_embedding", c.fusion.use_negative_embedding},
          {"voxel_size", c.voxel_size},
          {"seed", c.seed}};
}

EvalReport evaluate(Segmenter& segmenter, const std::vector<sim::LabeledScene>& dataset, int max_clicks,
                    std::span<const EvalTarget> targets) {
  if (max_clicks < 1) throw ConfigError("evaluate: max_clicks must be >= 1");
  if (dataset.empty()) throw InputError("evaluate: empty dataset");
  std::vector<EvalTarget> all;
  if (targets.empty()) {
    for (std::size_t s = 0; s < dataset.size(); ++s) {
      for (auto id : dataset[s].instances) all.push_back({s, id});
    }
    targets = all;
  }

  EvalReport report;
  report.max_clicks = max_clicks;
  report.fingerprint = segmenter.fingerprint();
  std::size_t current = dataset.size();
  for (const auto& t : targets) {
    if (t.scene >= dataset.size()) {
      report.skipped.push_back(fmt::format("scene #{} instance {}: no such scene", t.scene, t.instance));
      spdlog::warn("evaluate: {}", report.skipped.back());
      continue;
    }
    const sim::LabeledScene& scene = dataset[t.scene];
    const auto truth = scene.voxel_truth.find(t.instance);
    if (truth == scene.voxel_truth.end()) {
      report.skipped.push_back(fmt::format("{} instance {}: not in scene", scene.name, t.instance));
      spdlog::warn("evaluate: {}", report.skipped.back());
      continue;
    }
    if (t.scene != current) {
      segmenter.begin_scene(scene);
      current = t.scene;
    }
    const grid::Mask point_truth = grid::instance_point_mask(scene.points, t.instance);

    InstanceResult r;
    r.scene = scene.name;
    r.instance = t.instance;
    model::ClickSet clicks(static_cast<std::size_t>(max_clicks));
    clicks.push(scene.first_clicks.at(t.instance).click);
    for (int k = 1; k <= max_clicks; ++k) {
      const grid::Mask voxel_mask = segmenter.predict(clicks);
      if (voxel_mask.size() != scene.voxels.scene.size()) {
        throw ContractViolation("evaluate: segmenter returned a mask of the wrong length");
      }
      r.iou.push_back(iou(grid::unproject_mask(voxel_mask, scene.voxels.map), point_truth));
      if (k == max_clicks) break;
      const sim::NextClick next = sim::next_click(voxel_mask, truth->second, scene.voxels.scene);
      if (next.converged) {
        r.converged_at = k;
        r.iou.resize(static_cast<std::size_t>(max_clicks), r.iou.back());
        break;
      }
      clicks.push(next.click);
    }
    report.instances.push_back(std::move(r));
  }
  if (report.instances.empty()) throw InputError("evaluate: no instance could be evaluated");
  return report;
}

EvalReport evaluate(const model::Model<float>& model, const std::vector<sim::LabeledScene>& dataset, int max_clicks,
                    const std::string& checkpoint_id) {
  ModelSegmenter segmenter(model, checkpoint_id);
  return evaluate(segmenter, dataset, max_clicks);
}

std::vector<double> EvalReport::mean_iou() const {
  std::vector<double> m(static_cast<std::size_t>(max_clicks), 0.0);
  for (const auto& r : instances) {
    for (std::size_t k = 0; k < m.size(); ++k) m[k] += r.iou[k];
  }
  for (double& v : m) v /= static_cast<double>(instances.size());
  return m;
}

std::string EvalReport::to_csv() const {
  std::string out = "scene,instance,converged_at";
  for (int k = 1; k <= max_clicks; ++k) out += fmt::format(",iou@{}", k);
  out += '\n';
  for (const auto& r : instances) {
    out += fmt::format("{},{},{}", r.scene, r.instance, r.converged_at);
    for (double v : r.iou) out += fmt::format(",{:.6f}", v);
    out += '\n';
  }
  out += "mean,,";
  for (double v : mean_iou()) out += fmt::format(",{:.6f}", v);
  out += '\n';
  return out;
}

std::string EvalReport::to_markdown() const {
  std::string out = "# Evaluation report\n\n";
  out += "IoU is measured on the original points (voxel masks unprojected through the point-to-voxel map).\n\n";
  out += "| key | value |\n|---|---|\n";
  for (const auto& [k, v] : fingerprint.items()) out += fmt::format("| {} | {} |\n", k, v.dump());
  out += fmt::format("| instances | {} |\n| skipped | {} |\n\n", instances.size(), skipped.size());
  std::string head = "|", rule = "|", row = "|";
  for (int k = 1; k <= max_clicks; ++k) {
    head += fmt::format(" IoU@{} |", k);
    rule += "---|";
  }
  for (double v : mean_iou()) row += fmt::format(" {:.4f} |", v);
  out += head + "\n" + rule + "\n" + row + "\n";
  if (!skipped.empty()) {
    out += "\n## Skipped\n\n";
    for (const auto& s : skipped) out += "- " + s + "\n";
  }
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& prefix) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write " + p.string());
    f << text;
  };
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  write(prefix.string() + ".csv", report.to_csv());
  write(prefix.string() + ".md", report.to_markdown());
}

std::vector<std::string> ablation_labels() { return {"explicit", "explicit+neg", "implicit", "implicit+neg"}; }

model::FusionConfig fusion_for_label(const std::string& label) {
  model::FusionConfig f;
  const auto plus = label.find('+');
  const std::string mode = label.substr(0, plus);
  f.mode = model::fusion_mode_from_string(mode);
  if (plus == std::string::npos) {
    f.use_negative_embedding = false;
  } else if (label.substr(plus) == "+neg") {
    f.use_negative_embedding = true;
  } else {
    throw ConfigError("unknown ablation label '" + label + "'");
  }
  return f;
}

AblationTable run_ablation(std::span<const AblationCell> cells, const std::vector<sim::LabeledScene>& dataset) {
  const int max_k = kAblationClicks.back();
  AblationTable table;
  for (const auto& cell : cells) {
    AblationRow row;
    row.label = cell.label;
    if (!cell.checkpoint || !std::filesystem::exists(*cell.checkpoint)) {
      spdlog::warn("ablation: no checkpoint for '{}'; row marked absent", cell.label);
      table.rows.push_back(std::move(row));
      continue;
    }
    try {
      const auto m = model::Model<float>::load(*cell.checkpoint);
      const auto means = evaluate(m, dataset, max_k, cell.checkpoint->filename().string()).mean_iou();
      std::vector<double> picked;
      for (int k : kAblationClicks) picked.push_back(means[static_cast<std::size_t>(k - 1)]);
      row.iou = std::move(picked);
    } catch (const FormatError& e) {
      spdlog::warn("ablation: unreadable checkpoint for '{}': {}", cell.label, e.what());
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string AblationTable::to_csv() const {
  std::string out = "config";
  for (int k : kAblationClicks) out += fmt::format(",iou@{}", k);
  out += '\n';
  for (const auto& r : rows) {
    out += r.label;
    for (std::size_t i = 0; i < kAblationClicks.size(); ++i) {
      out += r.iou ? fmt::format(",{:.6f}", (*r.iou)[i]) : std::string(",absent");
    }
    out += '\n';
  }
  return out;
}

std::string AblationTable::to_markdown() const {
  std::string out = "| config |";
  std::string rule = "|---|";
  for (int k : kAblationClicks) {
    out += fmt::format(" IoU@{} |", k);
    rule += "---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& r : rows) {
    out += "| " + r.label + " |";
    for (std::size_t i = 0; i < kAblationClicks.size(); ++i) {
      out += r.iou ? fmt::format(" {:.4f} |", (*r.iou)[i]) : std::string(" absent |");
    }
    out += '\n';
  }
  return out;
}

}  // namespace voxclick::eval

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "voxclick/model/model.hpp"
#include "voxclick/sim/trainer.hpp"

namespace voxclick::eval {

// |pred & gt| / |pred | gt|, and 1 when both are empty.
double iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt);

// Something that produces a voxel mask for the current scene from clicks.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual void begin_scene(const sim::LabeledScene& scene) = 0;
  virtual grid::Mask predict(const model::ClickSet& clicks) = 0;
  virtual nlohmann::json fingerprint() const = 0;
};

// Read-only wrapper around a model; the encoder runs once per scene.
class ModelSegmenter final : public Segmenter {
 public:
  ModelSegmenter(const model::Model<float>& model, std::string checkpoint_id);
  void begin_scene(const sim::LabeledScene& scene) override;
  grid::Mask predict(const model::ClickSet& clicks) override;
  nlohmann::json fingerprint() const override;

 private:
  const model::Model<float>& model_;
  std::string checkpoint_id_;
  std::optional<model::SceneContext<float>> context_;
};

struct InstanceResult {
  std::string scene;
  std::uint32_t instance = 0;
  std::vector<double> iou;  // iou[k - 1] = IoU@k (point level)
  int converged_at = 0;     // click count at which the voxel error vanished, 0 = never
};

struct EvalReport {
  int max_clicks = 0;
  nlohmann::json fingerprint;
  std::vector<InstanceResult> instances;
  std::vector<std::string> skipped;

  std::vector<double> mean_iou() const;
  std::string to_csv() const;
  std::string to_markdown() const;
};

struct EvalTarget {
  std::size_t scene = 0;
  std::uint32_t instance = 0;
};

// Simulated-user protocol: center click, then the center of the largest
// voxel error region, up to max_clicks. IoU is measured on points after
// unprojecting the voxel mask. Targets default to every instance of every
// scene; targets naming a missing instance are skipped and recorded.
EvalReport evaluate(Segmenter& segmenter, const std::vector<sim::LabeledScene>& dataset, int max_clicks,
                    std::span<const EvalTarget> targets = {});
EvalReport evaluate(const model::Model<float>& model, const std::vector<sim::LabeledScene>& dataset, int max_clicks,
                    const std::string& checkpoint_id = "in-memory");

void write_report(const EvalReport& report, const std::filesystem::path& prefix);  // prefix.csv + prefix.md

inline constexpr std::array<int, 5> kAblationClicks{1, 2, 3, 5, 10};

struct AblationCell {
  std::string label;  // e.g. "implicit+neg"
  std::optional<std::filesystem::path> checkpoint;
};

struct AblationRow {
  std::string label;
  std::optional<std::vector<double>> iou;  // at kAblationClicks; empty when absent
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::string to_csv() const;
  std::string to_markdown() const;
};

// The four fusion x negative-embedding cells in table order.
std::vector<std::string> ablation_labels();
model::FusionConfig fusion_for_label(const std::string& label);

// Missing or unreadable checkpoints leave their row absent.
AblationTable run_ablation(std::span<const AblationCell> cells, const std::vector<sim::LabeledScene>& dataset);

struct ReferenceRow {
  const char* label;
  std::array<double, 5> iou;  // percent, at kAblationClicks
};

// Full-scale ScanNet40 reference numbers for the four cells, kept for documentation.
// Desk-scale synthetic results are not comparable and are never checked
// against these.
inline constexpr std::array<ReferenceRow, 4> kReferenceScanNet40{{
    {"explicit", {59.6, 68.0, 73.2, 78.0, 82.6}},
    {"explicit+neg", {62.7, 70.5, 75.2, 79.6, 83.6}},
    {"implicit", {66.4, 73.2, 76.3, 78.9, 81.2}},
    {"implicit+neg", {68.2, 74.6, 77.3, 79.6, 81.7}},
}};

}  // namespace voxclick::eval

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "voxclick/grid/scene.hpp"
#include "voxclick/model/model.hpp"

namespace voxclick::serve {

struct StoredScene {
  std::string id;
  grid::PointScene points;
  grid::Voxelized voxels;
  grid::Bounds bounds;       // voxel-center frame used by the model
  grid::Bounds point_bounds; // clicks outside this box get snapped
  std::string file_bytes;    // E3D-PC v1 encoding served to clients
};

// Append-only; entries are immutable once added.
class SceneStore {
 public:
  std::shared_ptr<const StoredScene> add(std::string id, grid::PointScene points,
                                         double voxel_size = grid::kDefaultVoxelSize);
  // Every .e3dpc / .json file in dir, keyed by file stem. Returns the count.
  std::size_t load_directory(const std::filesystem::path& dir, double voxel_size = grid::kDefaultVoxelSize);
  std::shared_ptr<const StoredScene> get(const std::string& id) const;  // NotFound
  std::vector<std::shared_ptr<const StoredScene>> list() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const StoredScene>> scenes_;
};

class ModelStore {
 public:
  void add(std::string id, std::shared_ptr<const model::Model<float>> model);
  std::shared_ptr<const model::Model<float>> get(const std::string& id) const;  // NotFound
  std::vector<std::string> ids() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const model::Model<float>>> models_;
};

// Thrown when a click would exceed the session's click budget.
class SessionFull : public InputError {
 public:
  using InputError::InputError;
};

struct MaskState {
  grid::Mask point_mask;
  std::size_t voxel_count = 0;
  std::size_t point_count = 0;
  std::optional<double> iou;  // against the tracked ground-truth instance
};

struct ClickOutcome {
  MaskState mask;
  bool snapped = false;
  grid::Vec3 position{};  // as applied
  std::optional<std::size_t> snapped_point;
};

struct UndoOutcome {
  MaskState mask;
  bool changed = false;
  std::string notice;
};

struct SessionInfo {
  std::string id;
  std::string scene_id;
  std::string model_id;
  std::vector<model::Click> clicks;
  std::size_t max_clicks = 0;
  std::optional<std::uint32_t> gt_instance;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
};

struct ServiceOptions {
  // Keep the encoder output per session; off recomputes it on every click.
  bool cache_encoder = true;
};

// Transport-independent interactive sessions. Sessions lock individually;
// models and scenes are shared read-only.
class SessionService {
 public:
  SessionService(std::shared_ptr<SceneStore> scenes, std::shared_ptr<ModelStore> models, ServiceOptions options = {});

  // gt_instance: instance whose ground truth drives the reported IoU. When
  // not given and the scene is labeled, the instance under the first
  // positive click is used.
  std::string create_session(const std::string& scene_id, const std::string& model_id,
                             std::optional<std::uint32_t> gt_instance = std::nullopt);
  ClickOutcome add_click(const std::string& session_id, const grid::Vec3& position, model::ClickLabel label);
  UndoOutcome undo_click(const std::string& session_id);
  MaskState mask(const std::string& session_id) const;
  SessionInfo info(const std::string& session_id) const;
  bool close_session(const std::string& session_id);
  std::size_t session_count() const;

  const SceneStore& scenes() const { return *scenes_; }
  const ModelStore& models() const { return *models_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  static MaskState recompute(Session& s, bool cache_encoder);

  std::shared_ptr<SceneStore> scenes_;
  std::shared_ptr<ModelStore> models_;
  ServiceOptions options_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

// Point-level mask for a click set using the library pipeline directly;
// an empty click set, or an explicit-fusion set without positives, selects
// nothing.
grid::Mask pipeline_mask(const model::Model<float>& model, const StoredScene& scene, const model::ClickSet& clicks);

}  // namespace voxclick::serve

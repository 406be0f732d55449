#include "voxclick/serve/session.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "voxclick/data/scene_io.hpp"
#include "voxclick/diff/tensor.hpp"

namespace voxclick::serve {

namespace {

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

bool has_positive(const model::ClickSet& clicks) {
  return std::any_of(clicks.begin(), clicks.end(), [](const model::Click& c) { return c.positive(); });
}

grid::Mask predict_voxels(const model::Model<float>& m, const model::SceneContext<float>& ctx,
                          const model::ClickSet& clicks, std::size_t n_voxels) {
  if (clicks.empty()) return grid::Mask(n_voxels, 0);
  if (m.config().fusion.mode == model::FusionMode::kExplicit && !has_positive(clicks)) return grid::Mask(n_voxels, 0);
  const diff::NoGradGuard no_grad;
  return m.predict(ctx, clicks).fused.mask;
}

model::SceneContext<float> prepare(const model::Model<float>& m, const StoredScene& scene) {
  const diff::NoGradGuard no_grad;
  return m.prepare(scene.voxels.scene, scene.bounds);
}

bool inside(const grid::Bounds& b, const grid::Vec3& p) {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= b.min[a] && p[a] <= b.max[a])) return false;
  }
  return true;
}

std::size_t nearest_point(const grid::PointScene& s, const grid::Vec3& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& q = s.positions[i];
    const double d = (q[0] - p[0]) * (q[0] - p[0]) + (q[1] - p[1]) * (q[1] - p[1]) + (q[2] - p[2]) * (q[2] - p[2]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

std::shared_ptr<const StoredScene> SceneStore::add(std::string id, grid::PointScene points, double voxel_size) {
  auto s = std::make_shared<StoredScene>();
  s->id = id;
  s->file_bytes = data::encode_scene(points);
  s->voxels = grid::voxelize(points, voxel_size);
  s->bounds = model::SceneEncoder<float>::voxel_bounds(s->voxels.scene);
  s->point_bounds = grid::scene_bounds(points.positions);
  s->points = std::move(points);
  std::unique_lock lock(mutex_);
  if (scenes_.count(id)) throw InputError("scene id '" + id + "' already registered");
  scenes_.emplace(std::move(id), s);
  return s;
}

std::size_t SceneStore::load_directory(const std::filesystem::path& dir, double voxel_size) {
  std::size_t n = 0;
  for (const auto& path : data::list_scene_files(dir)) {
    add(path.stem().string(), data::load_scene_any(path), voxel_size);
    ++n;
  }
  return n;
}

std::shared_ptr<const StoredScene> SceneStore::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = scenes_.find(id);
  if (it == scenes_.end()) throw NotFound("unknown scene '" + id + "'");
  return it->second;
}

std::vector<std::shared_ptr<const StoredScene>> SceneStore::list() const {
  std::shared_lock lock(mutex_);
  std::vector<std::shared_ptr<const StoredScene>> out;
  for (const auto& [id, s] : scenes_) out.push_back(s);
  return out;
}

void ModelStore::add(std::string id, std::shared_ptr<const model::Model<float>> model) {
  std::unique_lock lock(mutex_);
  if (models_.count(id)) throw InputError("model id '" + id + "' already registered");
  models_.emplace(std::move(id), std::move(model));
}

std::shared_ptr<const model::Model<float>> ModelStore::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = models_.find(id);
  if (it == models_.end()) throw NotFound("unknown model '" + id + "'");
  return it->second;
}

std::vector<std::string> ModelStore::ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, m] : models_) out.push_back(id);
  return out;
}

struct SessionService::Session {
  mutable std::mutex mutex;
  SessionInfo info;
  std::shared_ptr<const StoredScene> scene;
  std::shared_ptr<const model::Model<float>> model;
  model::ClickSet clicks;
  std::optional<model::SceneContext<float>> context;
  std::optional<grid::Mask> truth;
  MaskState latest;
};

SessionService::SessionService(std::shared_ptr<SceneStore> scenes, std::shared_ptr<ModelStore> models,
                               ServiceOptions options)
    : scenes_(std::move(scenes)), models_(std::move(models)), options_(options) {}

std::string SessionService::create_session(const std::string& scene_id, const std::string& model_id,
                                           std::optional<std::uint32_t> gt_instance) {
  auto s = std::make_shared<Session>();
  s->scene = scenes_->get(scene_id);
  s->model = models_->get(model_id);
  if (gt_instance) {
    s->truth = grid::instance_point_mask(s->scene->points, *gt_instance);
    if (std::find(s->truth->begin(), s->truth->end(), 1) == s->truth->end()) {
      throw InputError(fmt::format("scene '{}' has no instance {}", scene_id, *gt_instance));
    }
    s->info.gt_instance = gt_instance;
  }
  const auto cap = static_cast<std::size_t>(s->model->config().prompt.max_clicks);
  s->clicks = model::ClickSet(cap);
  if (options_.cache_encoder) s->context = prepare(*s->model, *s->scene);
  s->latest.point_mask.assign(s->scene->points.size(), 0);
  s->info.scene_id = scene_id;
  s->info.model_id = model_id;
  s->info.max_clicks = cap;
  s->info.created_ms = s->info.updated_ms = now_ms();

  std::unique_lock lock(mutex_);
  s->info.id = fmt::format("s{:06d}", next_id_++);
  sessions_.emplace(s->info.id, s);
  return s->info.id;
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
  return it->second;
}

MaskState SessionService::recompute(Session& s, bool cache_encoder) {
  std::optional<model::SceneContext<float>> fresh;
  if (!cache_encoder) fresh = prepare(*s.model, *s.scene);
  const model::SceneContext<float>& ctx = cache_encoder ? *s.context : *fresh;
  const grid::Mask voxels = predict_voxels(*s.model, ctx, s.clicks, s.scene->voxels.scene.size());
  MaskState m;
  m.point_mask = grid::unproject_mask(voxels, s.scene->voxels.map);
  m.voxel_count = static_cast<std::size_t>(std::count(voxels.begin(), voxels.end(), std::uint8_t{1}));
  m.point_count = static_cast<std::size_t>(std::count(m.point_mask.begin(), m.point_mask.end(), std::uint8_t{1}));
  if (s.truth) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < m.point_mask.size(); ++i) {
      inter += m.point_mask[i] && (*s.truth)[i];
      uni += m.point_mask[i] || (*s.truth)[i];
    }
    m.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return m;
}

ClickOutcome SessionService::add_click(const std::string& session_id, const grid::Vec3& position,
                                       model::ClickLabel label) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  if (s->clicks.full()) {
    throw SessionFull(fmt::format("session {} already has {} clicks, the maximum; undo a click first", session_id,
                                  s->clicks.max_clicks()));
  }
  for (double v : position) {
    if (!std::isfinite(v)) throw InputError("click position must be finite");
  }
  ClickOutcome out;
  out.position = position;
  if (!inside(s->scene->point_bounds, position)) {
    const std::size_t i = nearest_point(s->scene->points, position);
    out.snapped = true;
    out.snapped_point = i;
    out.position = s->scene->points.positions[i];
  }
  const auto previous_truth = s->truth;
  const auto previous_gt = s->info.gt_instance;
  if (!s->truth && s->scene->points.has_labels() && label == model::ClickLabel::kPositive &&
      !std::any_of(s->clicks.begin(), s->clicks.end(), [](const model::Click& c) { return c.positive(); })) {
    const std::uint32_t id = (*s->scene->points.instance_labels)[nearest_point(s->scene->points, out.position)];
    if (id != 0) {
      s->truth = grid::instance_point_mask(s->scene->points, id);
      s->info.gt_instance = id;
    }
  }
  model::Click c;
  c.position = out.position;
  c.label = label;
  c.ordinal = static_cast<int>(s->clicks.size());
  s->clicks.push(c);
  try {
    s->latest = recompute(*s, options_.cache_encoder);
  } catch (...) {
    s->clicks.pop();
    s->truth = previous_truth;
    s->info.gt_instance = previous_gt;
    throw;
  }
  s->info.clicks.assign(s->clicks.begin(), s->clicks.end());
  s->info.updated_ms = now_ms();
  out.mask = s->latest;
  return out;
}

UndoOutcome SessionService::undo_click(const std::string& session_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  UndoOutcome out;
  if (s->clicks.empty()) {
    out.notice = "no clicks to undo";
    out.mask = s->latest;
    return out;
  }
  s->clicks.pop();
  s->latest = recompute(*s, options_.cache_encoder);
  s->info.clicks.assign(s->clicks.begin(), s->clicks.end());
  s->info.updated_ms = now_ms();
  out.changed = true;
  out.mask = s->latest;
  return out;
}

MaskState SessionService::mask(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return s->latest;
}

SessionInfo SessionService::info(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return s->info;
}

bool SessionService::close_session(const std::string& session_id) {
  std::unique_lock lock(mutex_);
  return sessions_.erase(session_id) > 0;
}

std::size_t SessionService::session_count() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

grid::Mask pipeline_mask(const model::Model<float>& model, const StoredScene& scene, const model::ClickSet& clicks) {
  const auto ctx = prepare(model, scene);
  return grid::unproject_mask(predict_voxels(model, ctx, clicks, scene.voxels.scene.size()), scene.voxels.map);
}

}  // namespace voxclick::serve

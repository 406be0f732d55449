#include "voxclick/serve/http.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "voxclick/serve/rle.hpp"

namespace voxclick::serve {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  send_json(res, status, {{"error", kind}, {"message", message}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw InputError("request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw InputError(std::string("request body is not valid JSON: ") + e.what());
  }
}

template <typename V>
V required(const json& j, const char* key) {
  if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const json::exception&) {
    throw InputError(std::string("field '") + key + "' has the wrong type");
  }
}

json click_json(const model::Click& c) {
  return {{"x", c.position[0]}, {"y", c.position[1]}, {"z", c.position[2]}, {"label", model::to_string(c.label)}};
}

}  // namespace

json to_json(const MaskState& m) {
  json j = {{"mask", mask_to_json(m.point_mask)}, {"voxel_count", m.voxel_count}, {"point_count", m.point_count}};
  j["iou"] = m.iou ? json(*m.iou) : json(nullptr);
  return j;
}

json to_json(const SessionInfo& s) {
  json clicks = json::array();
  for (const auto& c : s.clicks) clicks.push_back(click_json(c));
  json j = {{"session_id", s.id},   {"scene_id", s.scene_id},     {"model_id", s.model_id},
            {"clicks", clicks},     {"max_clicks", s.max_clicks}, {"created_ms", s.created_ms},
            {"updated_ms", s.updated_ms}};
  j["gt_instance"] = s.gt_instance ? json(*s.gt_instance) : json(nullptr);
  return j;
}

HttpServer::HttpServer(std::shared_ptr<SessionService> service, HttpOptions options)
    : service_(std::move(service)), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  auto& srv = *server_;
  const std::string origin = options_.cors_origin;
  srv.set_default_headers({{"Access-Control-Allow-Origin", origin},
                           {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.set_exception_handler([](const httplib::Request& req, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const NotFound& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const SessionFull& e) {
      send_error(res, 409, "session_full", e.what());
    } catch (const InputError& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const FormatError& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const ConfigError& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, "internal", e.what());
    }
  });

  srv.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });

  srv.Get("/models", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"models", service_->models().ids()}, {"default", options_.default_model}});
  });

  srv.Get("/scenes", [this](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    for (const auto& s : service_->scenes().list()) {
      json labels = json::array();
      if (s->points.has_labels()) labels = grid::instance_ids(s->points);
      list.push_back({{"id", s->id},
                      {"n_points", s->points.size()},
                      {"n_voxels", s->voxels.scene.size()},
                      {"has_labels", s->points.has_labels()},
                      {"instances", labels},
                      {"bounds", {{"min", s->point_bounds.min}, {"max", s->point_bounds.max}}}});
    }
    send_json(res, 200, {{"scenes", list}});
  });

  srv.Get(R"(/scenes/([^/]+)/points)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto scene = service_->scenes().get(req.matches[1]);
    // Status left unset so httplib answers Range requests with 206.
    res.set_content(scene->file_bytes, "application/octet-stream");
  });

  srv.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const auto scene_id = required<std::string>(body, "scene_id");
    const std::string model_id =
        body.contains("model_id") ? required<std::string>(body, "model_id") : options_.default_model;
    std::optional<std::uint32_t> gt;
    if (body.contains("gt_instance") && !body.at("gt_instance").is_null()) {
      gt = required<std::uint32_t>(body, "gt_instance");
    }
    const std::string id = service_->create_session(scene_id, model_id, gt);
    json out = to_json(service_->info(id));
    const auto scene = service_->scenes().get(scene_id);
    out["n_points"] = scene->points.size();
    out["n_voxels"] = scene->voxels.scene.size();
    send_json(res, 201, out);
  });

  srv.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(service_->info(req.matches[1])));
  });

  srv.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    if (!service_->close_session(req.matches[1])) throw NotFound("unknown session '" + std::string(req.matches[1]) + "'");
    send_json(res, 200, {{"closed", true}});
  });

  srv.Post(R"(/sessions/([^/]+)/clicks)", [this](const httplib::Request& req, httplib::Response& res) {
    const json body = parse_body(req);
    const grid::Vec3 p{required<double>(body, "x"), required<double>(body, "y"), required<double>(body, "z")};
    const auto label = model::click_label_from_string(required<std::string>(body, "label"));
    const std::string id = req.matches[1];
    const ClickOutcome r = service_->add_click(id, p, label);
    json out = to_json(r.mask);
    out["snapped"] = r.snapped;
    out["position"] = r.position;
    if (r.snapped_point) out["snapped_point"] = *r.snapped_point;
    out["session"] = to_json(service_->info(id));
    send_json(res, 200, out);
  });

  srv.Post(R"(/sessions/([^/]+)/undo)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const UndoOutcome r = service_->undo_click(id);
    json out = to_json(r.mask);
    out["changed"] = r.changed;
    out["notice"] = r.notice.empty() ? json(nullptr) : json(r.notice);
    out["session"] = to_json(service_->info(id));
    send_json(res, 200, out);
  });

  srv.Get(R"(/sessions/([^/]+)/mask)", [this](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(service_->mask(req.matches[1])));
  });
}

int HttpServer::bind() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
  } else {
    port_ = server_->bind_to_port(options_.host, options_.port) ? options_.port : -1;
  }
  if (port_ <= 0) throw InputError("cannot bind " + options_.host + ":" + std::to_string(options_.port));
  return port_;
}

int HttpServer::start() {
  bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void HttpServer::run() {
  bind();
  spdlog::info("segserve listening on http://{}:{}", options_.host, port_);
  server_->listen_after_bind();
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace voxclick::serve

#include <doctest.h>

#include <random>
#include <thread>

#include "fixtures.hpp"
#include "voxclick/data/generator.hpp"
#include "voxclick/data/scene_io.hpp"
#include "voxclick/eval/bench.hpp"
#include "voxclick/serve/http.hpp"
#include "voxclick/serve/rle.hpp"
#include "voxclick/serve/session.hpp"
#include "voxclick/sim/dataset.hpp"
#include "voxclick/sim/trainer.hpp"

// After Eigen: resolv.h (pulled in by httplib) defines _res.
#include <httplib.h>

using namespace voxclick;
using grid::Mask;
using model::ClickLabel;
using nlohmann::json;

namespace {

// One small trained model and two fixture scenes, shared by every test.
struct World {
  std::shared_ptr<serve::SceneStore> scenes = std::make_shared<serve::SceneStore>();
  std::shared_ptr<serve::ModelStore> models = std::make_shared<serve::ModelStore>();
  std::shared_ptr<const model::Model<float>> trained;

  World() {
    auto recipe = fixture::small_recipe(900);
    recipe.min_objects = 2;
    const auto data = sim::generate_dataset(recipe, 8);
    auto m = std::make_shared<model::Model<float>>(fixture::tiny_config(model::FusionMode::kImplicit, true, 11));
    auto cfg = sim::TrainConfig::desk();
    cfg.epochs = 25;
    cfg.lr0 = 3e-3;
    cfg.rollout.max_clicks = 4;
    sim::train(*m, data, cfg);
    trained = m;
    models->add("default", trained);
    models->add("explicit", std::make_shared<model::Model<float>>(fixture::tiny_config(model::FusionMode::kExplicit)));
    scenes->add("room", data[0].points);
    scenes->add("room2", data[1].points);
    auto unlabeled = data[2].points;
    unlabeled.instance_labels.reset();
    scenes->add("bare", unlabeled);
  }
};

World& world() {
  static World w;
  return w;
}

std::shared_ptr<serve::SessionService> service(bool cache = true) {
  return std::make_shared<serve::SessionService>(world().scenes, world().models, serve::ServiceOptions{cache});
}

grid::Vec3 object_click(const std::string& scene, std::uint32_t id) {
  const auto s = world().scenes->get(scene);
  return sim::first_click(s->points, id).click.position;
}

model::ClickSet click_set(const std::vector<std::pair<grid::Vec3, ClickLabel>>& v, std::size_t cap = 10) {
  model::ClickSet c(cap);
  for (const auto& [p, l] : v) c.push({p, l, static_cast<int>(c.size())});
  return c;
}

}  // namespace

// ---- run-length encoding ----

TEST_CASE("run-length encoding examples") {
  CHECK(serve::encode_runs(Mask{0, 1, 1, 0, 1}) == std::vector<std::uint64_t>{1, 2, 4, 1});
  CHECK(serve::encode_runs(Mask{0, 0, 0}).empty());
  CHECK(serve::encode_runs(Mask{1, 1, 1}) == std::vector<std::uint64_t>{0, 3});
  CHECK(serve::decode_runs(5, std::vector<std::uint64_t>{1, 2, 4, 1}) == Mask{0, 1, 1, 0, 1});
  const json j = serve::mask_to_json(Mask{1, 0, 1});
  CHECK(j == json{{"n_points", 3}, {"runs", {0, 1, 2, 1}}});
  CHECK(serve::mask_from_json(j) == Mask{1, 0, 1});
}

TEST_CASE("run-length encoding round-trips random masks") {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 300; ++t) {
    Mask m(std::uniform_int_distribution<std::size_t>(0, 500)(rng));
    std::bernoulli_distribution coin(std::uniform_real_distribution<double>(0, 1)(rng));
    for (auto& b : m) b = coin(rng);
    const auto runs = serve::encode_runs(m);
    CHECK(runs.size() % 2 == 0);
    CHECK(serve::decode_runs(m.size(), runs) == m);
  }
}

TEST_CASE("malformed runs are rejected") {
  CHECK_THROWS_AS(serve::decode_runs(5, std::vector<std::uint64_t>{3, 1, 1, 1}), FormatError);
  CHECK_THROWS_AS(serve::decode_runs(5, std::vector<std::uint64_t>{1, 2, 3, 1}), FormatError);  // touching runs
  CHECK_THROWS_AS(serve::decode_runs(5, std::vector<std::uint64_t>{4, 2}), FormatError);
  CHECK_THROWS_AS(serve::decode_runs(5, std::vector<std::uint64_t>{1}), FormatError);
  CHECK_THROWS_AS(serve::decode_runs(5, std::vector<std::uint64_t>{1, 0}), FormatError);
  CHECK_THROWS_AS(serve::mask_from_json(json{{"runs", json::array()}}), FormatError);
}

// ---- sessions ----

TEST_CASE("creating sessions") {
  auto svc = service();
  const auto id = svc->create_session("room", "default");
  CHECK(id == "s000001");
  const auto info = svc->info(id);
  CHECK(info.clicks.empty());
  CHECK(info.max_clicks == 10);
  CHECK(info.scene_id == "room");
  CHECK(svc->mask(id).point_count == 0);
  CHECK_THROWS_AS(svc->create_session("nowhere", "default"), NotFound);
  CHECK_THROWS_AS(svc->create_session("room", "nomodel"), NotFound);
  CHECK_THROWS_AS(svc->create_session("room", "default", 999u), InputError);
  CHECK_THROWS_AS(svc->add_click("s999999", {0, 0, 0}, ClickLabel::kPositive), NotFound);
  CHECK(svc->close_session(id));
  CHECK_FALSE(svc->close_session(id));
  CHECK_THROWS_AS(svc->mask(id), NotFound);
}

TEST_CASE("first click on an object gives a non-empty mask and an IoU") {
  auto svc = service();
  const auto id = svc->create_session("room", "default");
  const auto r = svc->add_click(id, object_click("room", 1), ClickLabel::kPositive);
  CHECK_FALSE(r.snapped);
  CHECK(r.mask.point_count > 0);
  CHECK(r.mask.voxel_count > 0);
  REQUIRE(r.mask.iou.has_value());
  const auto truth = grid::instance_point_mask(world().scenes->get("room")->points, 1);
  CHECK(*r.mask.iou == eval::iou(r.mask.point_mask, truth));
  CHECK(svc->info(id).gt_instance == 1u);
}

TEST_CASE("sessions on one scene are independent") {
  auto svc = service();
  const auto a = svc->create_session("room", "default");
  const auto b = svc->create_session("room", "default");
  const auto before = svc->mask(b);
  svc->add_click(a, object_click("room", 1), ClickLabel::kPositive);
  svc->add_click(a, object_click("room", 2), ClickLabel::kNegative);
  CHECK(svc->info(b).clicks.empty());
  CHECK(svc->mask(b).point_mask == before.point_mask);
  CHECK(svc->info(a).clicks.size() == 2);
}

TEST_CASE("the eleventh click is rejected") {
  auto svc = service();
  const auto id = svc->create_session("room", "default");
  const auto p = object_click("room", 1);
  for (int i = 0; i < 10; ++i) svc->add_click(id, p, i % 2 ? ClickLabel::kNegative : ClickLabel::kPositive);
  const auto mask = svc->mask(id);
  CHECK_THROWS_AS(svc->add_click(id, p, ClickLabel::kPositive), serve::SessionFull);
  CHECK(svc->info(id).clicks.size() == 10);
  CHECK(svc->mask(id).point_mask == mask.point_mask);
  CHECK_THROWS_AS(svc->add_click(svc->create_session("room", "default"), {NAN, 0, 0}, ClickLabel::kPositive),
                  InputError);
}

TEST_CASE("out-of-bounds clicks snap to the nearest point") {
  auto svc = service();
  const auto scene = world().scenes->get("room");
  const auto id = svc->create_session("room", "default");
  const grid::Vec3 far{scene->point_bounds.max[0] + 5.0, scene->point_bounds.min[1], 0.0};
  const auto r = svc->add_click(id, far, ClickLabel::kPositive);
  REQUIRE(r.snapped);
  REQUIRE(r.snapped_point.has_value());
  double best = 1e300;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < scene->points.size(); ++i) {
    const auto& q = scene->points.positions[i];
    const double d = (q[0] - far[0]) * (q[0] - far[0]) + (q[1] - far[1]) * (q[1] - far[1]) + q[2] * q[2];
    if (d < best) {
      best = d;
      arg = i;
    }
  }
  CHECK(*r.snapped_point == arg);
  CHECK(r.position == scene->points.positions[arg]);
  CHECK(svc->info(id).clicks[0].position == r.position);
}

TEST_CASE("undo restores earlier masks bit for bit") {
  auto svc = service();
  const auto id = svc->create_session("room", "default");
  const auto empty = svc->mask(id);
  const auto a = svc->add_click(id, object_click("room", 1), ClickLabel::kPositive).mask;
  svc->add_click(id, object_click("room", 2), ClickLabel::kNegative);
  const auto u1 = svc->undo_click(id);
  CHECK(u1.changed);
  CHECK(u1.mask.point_mask == a.point_mask);
  CHECK(u1.mask.iou == a.iou);

  const auto u0 = svc->undo_click(id);
  CHECK(u0.mask.point_mask == empty.point_mask);
  CHECK(u0.mask.voxel_count == 0);
  CHECK(std::all_of(u0.mask.point_mask.begin(), u0.mask.point_mask.end(), [](auto b) { return b == 0; }));

  const auto none = svc->undo_click(id);
  CHECK_FALSE(none.changed);
  CHECK(none.notice == "no clicks to undo");

  // A then B then undo equals a fresh session with only A.
  const auto fresh = svc->create_session("room", "default");
  CHECK(svc->add_click(fresh, object_click("room", 1), ClickLabel::kPositive).mask.point_mask == a.point_mask);
}

TEST_CASE("service masks equal the library pipeline, cached or not") {
  auto cached = service(true);
  auto uncached = service(false);
  const auto scene = world().scenes->get("room2");
  const auto ids = grid::instance_ids(scene->points);
  const std::vector<std::pair<grid::Vec3, ClickLabel>> seq{{object_click("room2", ids[0]), ClickLabel::kPositive},
                                                           {object_click("room2", ids.back()), ClickLabel::kNegative},
                                                           {scene->voxels.scene.center(3), ClickLabel::kPositive}};
  const auto a = cached->create_session("room2", "default");
  const auto b = uncached->create_session("room2", "default");
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto ma = cached->add_click(a, seq[k].first, seq[k].second).mask;
    const auto mb = uncached->add_click(b, seq[k].first, seq[k].second).mask;
    CHECK(ma.point_mask == mb.point_mask);
    const auto lib = serve::pipeline_mask(*world().trained, *scene,
                                          click_set({seq.begin(), seq.begin() + static_cast<long>(k) + 1}));
    CHECK(ma.point_mask == lib);
  }
}

TEST_CASE("unlabeled scenes and explicit models") {
  auto svc = service();
  const auto bare = svc->create_session("bare", "default");
  const auto r = svc->add_click(bare, world().scenes->get("bare")->voxels.scene.center(0), ClickLabel::kPositive);
  CHECK_FALSE(r.mask.iou.has_value());
  CHECK_FALSE(svc->info(bare).gt_instance.has_value());

  const auto ex = svc->create_session("room", "explicit");
  const auto neg = svc->add_click(ex, object_click("room", 1), ClickLabel::kNegative);
  CHECK(neg.mask.point_count == 0);
}

TEST_CASE("concurrent sessions give the same masks as sequential ones") {
  auto svc = service();
  const auto scene = world().scenes->get("room");
  std::vector<grid::Vec3> points;
  for (std::size_t i = 0; i < 4; ++i) points.push_back(scene->voxels.scene.center(i * 37 % scene->voxels.scene.size()));
  std::vector<Mask> sequential;
  for (const auto& p : points) {
    sequential.push_back(serve::pipeline_mask(*world().trained, *scene, click_set({{p, ClickLabel::kPositive}})));
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < points.size(); ++i) ids.push_back(svc->create_session("room", "default"));
  std::vector<Mask> got(points.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < points.size(); ++i) {
    threads.emplace_back([&, i] { got[i] = svc->add_click(ids[i], points[i], ClickLabel::kPositive).mask.point_mask; });
  }
  for (auto& t : threads) t.join();
  CHECK(got == sequential);
}

// ---- HTTP ----

TEST_CASE("HTTP API round trip") {
  auto svc = service();
  serve::HttpOptions opts;
  opts.port = 0;
  serve::HttpServer server(svc, opts);
  const int port = server.start();
  REQUIRE(port > 0);
  httplib::Client cli("127.0.0.1", port);

  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

  auto models = cli.Get("/models");
  REQUIRE(models);
  CHECK(json::parse(models->body).at("default") == "default");

  auto scenes = cli.Get("/scenes");
  REQUIRE(scenes);
  const auto sl = json::parse(scenes->body).at("scenes");
  CHECK(sl.size() == 3);
  CHECK(sl[0].at("id") == "bare");

  auto pts = cli.Get("/scenes/room/points");
  REQUIRE(pts);
  CHECK(pts->status == 200);
  CHECK(pts->get_header_value("Content-Type") == "application/octet-stream");
  const auto decoded = data::decode_scene(pts->body);
  CHECK(decoded.positions == world().scenes->get("room")->points.positions);
  CHECK(cli.Get("/scenes/none/points")->status == 404);
  auto chunk = cli.Get("/scenes/room/points", {httplib::make_range_header({{20, 51}})});
  REQUIRE(chunk);
  CHECK(chunk->status == 206);
  CHECK(chunk->body == pts->body.substr(20, 32));

  auto created = cli.Post("/sessions", json{{"scene_id", "room"}}.dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto sid = json::parse(created->body).at("session_id").get<std::string>();
  CHECK(json::parse(created->body).at("n_points") == world().scenes->get("room")->points.size());

  const auto p = object_click("room", 1);
  auto click = cli.Post("/sessions/" + sid + "/clicks",
                        json{{"x", p[0]}, {"y", p[1]}, {"z", p[2]}, {"label", "positive"}}.dump(), "application/json");
  REQUIRE(click);
  CHECK(click->status == 200);
  const auto cj = json::parse(click->body);
  const auto lib = serve::pipeline_mask(*world().trained, *world().scenes->get("room"),
                                        click_set({{p, ClickLabel::kPositive}}));
  CHECK(serve::mask_from_json(cj.at("mask")) == lib);
  CHECK(cj.at("snapped") == false);
  CHECK(cj.at("session").at("clicks").size() == 1);
  CHECK(cj.at("iou").is_number());

  auto mask = cli.Get("/sessions/" + sid + "/mask");
  REQUIRE(mask);
  CHECK(serve::mask_from_json(json::parse(mask->body).at("mask")) == lib);

  auto bad = cli.Post("/sessions/" + sid + "/clicks", json{{"x", 0}, {"label", "positive"}}.dump(), "application/json");
  CHECK(bad->status == 400);
  CHECK(json::parse(bad->body).at("error") == "bad_request");
  CHECK(cli.Post("/sessions/" + sid + "/clicks", "not json", "application/json")->status == 400);
  CHECK(cli.Post("/sessions/" + sid + "/clicks",
                 json{{"x", 0}, {"y", 0}, {"z", 0}, {"label", "maybe"}}.dump(), "application/json")
            ->status == 400);

  for (int i = 1; i < 10; ++i) {
    CHECK(cli.Post("/sessions/" + sid + "/clicks",
                   json{{"x", p[0]}, {"y", p[1]}, {"z", p[2]}, {"label", "negative"}}.dump(), "application/json")
              ->status == 200);
  }
  auto full = cli.Post("/sessions/" + sid + "/clicks",
                       json{{"x", p[0]}, {"y", p[1]}, {"z", p[2]}, {"label", "negative"}}.dump(), "application/json");
  CHECK(full->status == 409);
  CHECK(json::parse(full->body).at("error") == "session_full");

  auto undo = cli.Post("/sessions/" + sid + "/undo", "", "application/json");
  REQUIRE(undo);
  CHECK(json::parse(undo->body).at("changed") == true);
  CHECK(json::parse(undo->body).at("session").at("clicks").size() == 9);

  CHECK(cli.Get("/sessions/" + sid)->status == 200);
  CHECK(cli.Get("/sessions/s404404/mask")->status == 404);
  CHECK(cli.Post("/sessions", json{{"scene_id", "nope"}}.dump(), "application/json")->status == 404);
  CHECK(cli.Post("/sessions", json{{"model_id", "default"}}.dump(), "application/json")->status == 400);

  auto opt = cli.Options("/sessions");
  REQUIRE(opt);
  CHECK(opt->status == 204);
  CHECK(opt->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

  CHECK(cli.Delete("/sessions/" + sid)->status == 200);
  CHECK(cli.Delete("/sessions/" + sid)->status == 404);
  server.stop();
}

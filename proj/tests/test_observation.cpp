#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <thread>

#include "golden.hpp"
#include "ncap/errors.hpp"
#include "ncap/observation.hpp"

using namespace ncap;
using namespace std::chrono_literals;

namespace {

ActorState actor_at(const std::string& id, double x, double y) {
  ActorState a;
  a.actor_id = id;
  a.box = OrientedBox{Pose2{x, y, 0.3}, 4.5, 1.9};
  a.velocity = Vec2{1.0, -2.0};
  return a;
}

WorldSnapshot world_with(std::vector<ActorState> actors) {
  WorldSnapshot w;
  w.time = 0.5;
  w.ego.speed = 10.0;
  w.ego.time = 0.5;
  w.actors = std::move(actors);
  return w;
}

}  // namespace

TEST(RangeBin, BoundariesBelongToLowerBin) {
  EXPECT_EQ(range_bin(4.999), -1);
  EXPECT_EQ(range_bin(5.0), 0);
  EXPECT_EQ(range_bin(15.0), 0);
  EXPECT_EQ(range_bin(15.0001), 1);
  EXPECT_EQ(range_bin(25.0), 1);
  EXPECT_EQ(range_bin(30.0), 2);
  EXPECT_EQ(range_bin(35.0), 2);
  EXPECT_EQ(range_bin(35.0001), -1);
}

TEST(NoiseModel, Validation) {
  PerceptionNoiseModel n;
  EXPECT_NO_THROW(validate(n));
  n.dropout[1] = 1.2;
  EXPECT_THROW(validate(n), std::invalid_argument);
  n = PerceptionNoiseModel{};
  n.position_sigma = -0.1;
  EXPECT_THROW(validate(n), std::invalid_argument);
}

TEST(ObserveGroundTruth, ZeroNoiseIsLossless) {
  const auto world = world_with({actor_at("a", 10, 1), actor_at("b", -30, 4), actor_at("c", 3, -2)});
  std::mt19937_64 rng(1);
  const auto obs = observe_ground_truth(world, {}, rng);
  EXPECT_EQ(obs.objects, world.actors);
  EXPECT_EQ(obs.ego, world.ego);
  EXPECT_EQ(obs.time, world.time);
  EXPECT_FALSE(obs.camera_rig.has_value());
}

TEST(ObserveGroundTruth, OutOfRangeActorsSkipped) {
  const auto world = world_with({actor_at("near", 10, 0), actor_at("far", 60, 0)});
  std::mt19937_64 rng(1);
  const auto obs = observe_ground_truth(world, {}, rng);
  ASSERT_EQ(obs.objects.size(), 1u);
  EXPECT_EQ(obs.objects[0].actor_id, "near");
}

TEST(ObserveGroundTruth, CertainDropoutEmptiesTheList) {
  PerceptionNoiseModel n;
  n.dropout = {1.0, 1.0, 1.0};
  n.dropout_outside_bins = 1.0;
  const auto world = world_with({actor_at("a", 2, 0), actor_at("b", 10, 0), actor_at("c", 20, 0),
                                 actor_at("d", 30, 0), actor_at("e", 45, 0)});
  std::mt19937_64 rng(9);
  EXPECT_TRUE(observe_ground_truth(world, n, rng).objects.empty());
}

TEST(ObserveGroundTruth, BinnedDropoutFrequency) {
  PerceptionNoiseModel n;
  n.dropout = {0.0, 0.0, 0.3};
  const auto world = world_with({actor_at("a", 30, 0)});
  std::mt19937_64 rng(2024);
  int kept = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) kept += static_cast<int>(observe_ground_truth(world, n, rng).objects.size());
  EXPECT_NEAR(static_cast<double>(kept) / draws, 0.70, 0.01);
}

TEST(ObserveGroundTruth, GaussianPerturbationScale) {
  PerceptionNoiseModel n;
  n.position_sigma = 0.5;
  n.velocity_sigma = 0.2;
  const auto world = world_with({actor_at("a", 10, 0)});
  std::mt19937_64 rng(5);
  double sx = 0, sxx = 0, svv = 0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    const auto o = observe_ground_truth(world, n, rng).objects.at(0);
    const double dx = o.box.center.x - 10.0;
    sx += dx;
    sxx += dx * dx;
    svv += std::pow(o.velocity.y + 2.0, 2);
    EXPECT_EQ(o.box.center.heading, 0.3);  // heading sigma is zero
  }
  EXPECT_NEAR(sx / draws, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(sxx / draws), 0.5, 0.02);
  EXPECT_NEAR(std::sqrt(svv / draws), 0.2, 0.01);
}

TEST(ObserveGroundTruth, LaterActorsUnaffectedByEarlierDropout) {
  PerceptionNoiseModel a;
  a.position_sigma = 0.3;
  PerceptionNoiseModel b = a;
  b.dropout = {1.0, 0.0, 0.0};
  const auto world = world_with({actor_at("near", 10, 0), actor_at("mid", 20, 0)});
  std::mt19937_64 r1(77), r2(77);
  const auto oa = observe_ground_truth(world, a, r1);
  const auto ob = observe_ground_truth(world, b, r2);
  ASSERT_EQ(oa.objects.size(), 2u);
  ASSERT_EQ(ob.objects.size(), 1u);
  EXPECT_EQ(oa.objects[1], ob.objects[0]);
}

TEST(ObserveGroundTruth, CarriesRouteCommand) {
  const Route left_turn{{-10, 0, 10}, {10, 0, 10}, {10, 50, 10}};
  auto world = world_with({});
  world.route = &left_turn;
  std::mt19937_64 rng(1);
  EXPECT_EQ(observe_ground_truth(world, {}, rng).command, high_level_command(world.ego, left_turn));
  EXPECT_EQ(observe_ground_truth(world, {}, rng).command, HighLevelCommand::kLeft);
}

TEST(GroundTruthObserver, SeededAndReproducible) {
  PerceptionNoiseModel n;
  n.position_sigma = 0.4;
  n.dropout = {0.2, 0.2, 0.2};
  const auto world = world_with({actor_at("a", 8, 0), actor_at("b", 18, 3), actor_at("c", 28, -3)});
  GroundTruthObserver o1(n, 123), o2(n, 123), o3(n, 124);
  bool differs = false;
  for (int i = 0; i < 20; ++i) {
    const auto x = o1.observe(world);
    EXPECT_EQ(x, o2.observe(world));
    differs = differs || !(x == o3.observe(world));
  }
  EXPECT_TRUE(differs);
}

TEST(CameraRig, SixSurroundCameras) {
  const auto rig = default_camera_rig();
  ASSERT_EQ(rig.size(), 6u);
  std::set<std::string> ids;
  for (const auto& c : rig) {
    ids.insert(c.camera_id);
    EXPECT_GT(c.intrinsic.fx, 0.0);
    EXPECT_GT(c.intrinsic.width, 0);
  }
  EXPECT_EQ(ids, (std::set<std::string>{"CAM_FRONT", "CAM_FRONT_LEFT", "CAM_FRONT_RIGHT", "CAM_BACK",
                                        "CAM_BACK_LEFT", "CAM_BACK_RIGHT"}));
}

TEST(RenderRequest, SchemaForSixCameraRig) {
  const auto world = fixtures::golden_world();
  const auto rig = default_camera_rig();
  const auto req = make_render_request(world, rig);
  EXPECT_EQ(req.at("type"), "render_request");
  EXPECT_EQ(req.at("version"), wire::kProtocolVersion);
  EXPECT_EQ(req.at("time").get<double>(), world.time);
  EXPECT_TRUE(req.at("ego_pose").is_object());
  ASSERT_EQ(req.at("cameras").size(), 6u);
  ASSERT_EQ(req.at("actors").size(), world.actors.size());
  for (std::size_t i = 0; i < world.actors.size(); ++i) {
    EXPECT_EQ(req["actors"][i].at("actor_id"), world.actors[i].actor_id);
    EXPECT_EQ(req["actors"][i].get<ActorState>(), world.actors[i]);
  }
  for (const auto& cam : req["cameras"]) {
    EXPECT_TRUE(cam.contains("camera_id"));
    EXPECT_TRUE(cam.contains("extrinsic"));
    EXPECT_TRUE(cam.contains("intrinsic"));
  }
  EXPECT_TRUE(fixtures::matches_golden("render_request.json", wire::dump_message(req)));
}

TEST(RenderReply, EchoServerRoundTrip) {
  auto [client, server] = wire::make_pipe();
  const auto rig = default_camera_rig();
  std::thread echo([s = server.get()] {
    for (int i = 0; i < 2; ++i) {
      const auto req = wire::recv_message(*s, 5s);
      nlohmann::json payloads = nlohmann::json::object();
      for (const auto& cam : req["cameras"]) {
        const std::string id = cam["camera_id"];
        std::vector<std::uint8_t> img(id.begin(), id.end());
        for (int b = 0; b < 256; ++b) img.push_back(static_cast<std::uint8_t>(b));
        payloads[id] = wire::base64_encode(img);
      }
      wire::send_message(*s, {{"type", "render_reply"}, {"payloads", payloads}});
    }
  });
  ExternalObserver observer(std::move(client), rig, 5s);
  for (int i = 0; i < 2; ++i) {
    const auto obs = observer.observe(fixtures::golden_world());
    EXPECT_TRUE(obs.objects.empty());
    ASSERT_TRUE(obs.camera_rig.has_value());
    EXPECT_EQ(*obs.camera_rig, rig);
    ASSERT_EQ(obs.sensor_payload.size(), 6u);
    for (const auto& [id, img] : obs.sensor_payload) {
      ASSERT_EQ(img.size(), id.size() + 256);
      EXPECT_EQ(std::string(img.begin(), img.begin() + static_cast<long>(id.size())), id);
      EXPECT_EQ(img.back(), 255);
    }
  }
  echo.join();
}

TEST(RenderReply, SchemaViolationsSurface) {
  const auto rig = default_camera_rig();
  nlohmann::json payloads = nlohmann::json::object();
  for (const auto& c : rig) payloads[c.camera_id] = "AAAA";
  EXPECT_NO_THROW(parse_render_reply({{"type", "render_reply"}, {"payloads", payloads}}, rig));

  auto missing = payloads;
  missing.erase("CAM_BACK");
  EXPECT_THROW(parse_render_reply({{"type", "render_reply"}, {"payloads", missing}}, rig), ProtocolError);
  auto extra = payloads;
  extra["CAM_ROOF"] = "AAAA";
  EXPECT_THROW(parse_render_reply({{"type", "render_reply"}, {"payloads", extra}}, rig), ProtocolError);
  auto bad = payloads;
  bad["CAM_FRONT"] = "***";
  EXPECT_THROW(parse_render_reply({{"type", "render_reply"}, {"payloads", bad}}, rig), ProtocolError);
  EXPECT_THROW(parse_render_reply({{"type", "error"}, {"message", "gpu on fire"}}, rig), ProtocolError);
  EXPECT_THROW(parse_render_reply({{"type", "render_reply"}}, rig), ProtocolError);
}

TEST(RenderReply, TimeoutIsTransportError) {
  auto [client, server] = wire::make_pipe();
  ExternalObserver observer(std::move(client), default_camera_rig(), 30ms);
  EXPECT_THROW(observer.observe(fixtures::golden_world()), TransportError);
}

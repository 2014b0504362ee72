#include "ncap/observation.hpp"

#include <set>
#include <stdexcept>

#include "ncap/errors.hpp"
#include "ncap/serialization.hpp"

namespace ncap {

CameraRig default_camera_rig() {
  const CameraIntrinsic front{1266.4, 1266.4, 816.3, 491.5, 1600, 900};
  const CameraIntrinsic back{809.2, 809.2, 829.2, 481.8, 1600, 900};
  return {
      {"CAM_FRONT", {0.40, 0.00, 1.51, 0.0, 0.0, 0.0}, front},
      {"CAM_FRONT_RIGHT", {0.25, -0.49, 1.49, -0.96, 0.0, 0.0}, front},
      {"CAM_FRONT_LEFT", {0.22, 0.49, 1.51, 0.96, 0.0, 0.0}, front},
      {"CAM_BACK", {-1.27, 0.00, 1.57, kPi, 0.0, 0.0}, back},
      {"CAM_BACK_LEFT", {-0.26, 0.48, 1.57, 1.92, 0.0, 0.0}, front},
      {"CAM_BACK_RIGHT", {-0.27, -0.48, 1.59, -1.92, 0.0, 0.0}, front},
  };
}

int range_bin(double range) {
  if (range < kRangeBinEdges[0]) {
    return -1;
  }
  for (int b = 0; b < 3; ++b) {
    if (range <= kRangeBinEdges[b + 1]) {
      return b;
    }
  }
  return -1;
}

double PerceptionNoiseModel::dropout_at(double range) const {
  const int b = range_bin(range);
  return b < 0 ? dropout_outside_bins : dropout[static_cast<std::size_t>(b)];
}

void validate(const PerceptionNoiseModel& noise) {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!(noise.position_sigma >= 0.0) || !(noise.heading_sigma >= 0.0) || !(noise.velocity_sigma >= 0.0)) {
    throw std::invalid_argument("noise sigmas must be non-negative");
  }
  for (double p : noise.dropout) {
    if (!prob(p)) throw std::invalid_argument("dropout probabilities must lie in [0, 1]");
  }
  if (!prob(noise.dropout_outside_bins)) {
    throw std::invalid_argument("dropout probabilities must lie in [0, 1]");
  }
  if (!(noise.detection_range > 0.0)) {
    throw std::invalid_argument("detection range must be positive");
  }
}

namespace {

Observation base_observation(const WorldSnapshot& world) {
  Observation obs;
  obs.time = world.time;
  obs.ego = world.ego;
  if (world.route != nullptr && !world.route->empty()) {
    obs.command = high_level_command(world.ego, *world.route);
  }
  return obs;
}

}  // namespace

Observation observe_ground_truth(const WorldSnapshot& world, const PerceptionNoiseModel& noise,
                                 std::mt19937_64& rng) {
  Observation obs = base_observation(world);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (const ActorState& actor : world.actors) {
    const double range = (actor.box.center.position() - world.ego.pose.position()).norm();
    if (range > noise.detection_range) {
      continue;
    }
    // Fixed draw count per actor keeps later actors' noise independent of
    // earlier dropout outcomes.
    const bool dropped = unit(rng) < noise.dropout_at(range);
    const double dx = gauss(rng), dy = gauss(rng), dh = gauss(rng), dvx = gauss(rng), dvy = gauss(rng);
    if (dropped) {
      continue;
    }
    ActorState seen = actor;
    if (noise.position_sigma > 0.0 || noise.heading_sigma > 0.0) {
      const Pose2& c = actor.box.center;
      seen.box.center = Pose2{c.x + noise.position_sigma * dx, c.y + noise.position_sigma * dy,
                              c.heading + noise.heading_sigma * dh};
    }
    if (noise.velocity_sigma > 0.0) {
      seen.velocity = actor.velocity + Vec2{noise.velocity_sigma * dvx, noise.velocity_sigma * dvy};
    }
    obs.objects.push_back(std::move(seen));
  }
  return obs;
}

GroundTruthObserver::GroundTruthObserver(PerceptionNoiseModel noise, std::uint64_t seed)
    : noise_(noise), rng_(seed) {
  validate(noise_);
}

Observation GroundTruthObserver::observe(const WorldSnapshot& world) {
  return observe_ground_truth(world, noise_, rng_);
}

nlohmann::json make_render_request(const WorldSnapshot& world, const CameraRig& rig) {
  return json{{"type", "render_request"},
              {"version", wire::kProtocolVersion},
              {"time", world.time},
              {"ego_pose", world.ego.pose},
              {"ego_speed", world.ego.speed},
              {"cameras", rig},
              {"actors", world.actors}};
}

SensorPayload parse_render_reply(const nlohmann::json& reply, const CameraRig& rig) {
  const std::string type = reply.value("type", "");
  if (type == "error") {
    throw ProtocolError("render server error: " + reply.value("message", std::string("unspecified")));
  }
  if (type != "render_reply") {
    throw ProtocolError("expected render_reply, got '" + type + "'");
  }
  auto it = reply.find("payloads");
  if (it == reply.end() || !it->is_object()) {
    throw ProtocolError("render_reply lacks a payloads object");
  }
  std::set<std::string> expected;
  for (const auto& cam : rig) {
    expected.insert(cam.camera_id);
  }
  std::set<std::string> got;
  SensorPayload out;
  for (const auto& [key, value] : it->items()) {
    if (!value.is_string()) {
      throw ProtocolError("payload for '" + key + "' is not a base64 string");
    }
    got.insert(key);
    try {
      out[key] = wire::base64_decode(value.get<std::string>());
    } catch (const std::exception& e) {
      throw ProtocolError("payload for '" + key + "': " + e.what());
    }
  }
  if (got != expected) {
    throw ProtocolError("render_reply camera ids do not match the requested rig");
  }
  return out;
}

Observation observe_external(const WorldSnapshot& world, wire::ByteStream& stream, const CameraRig& rig,
                             std::chrono::milliseconds timeout) {
  wire::send_message(stream, make_render_request(world, rig));
  const json reply = wire::recv_message(stream, timeout);
  Observation obs = base_observation(world);
  obs.camera_rig = rig;
  obs.sensor_payload = parse_render_reply(reply, rig);
  return obs;
}

ExternalObserver::ExternalObserver(std::unique_ptr<wire::ByteStream> stream, CameraRig rig,
                                   std::chrono::milliseconds timeout)
    : stream_(std::move(stream)), rig_(std::move(rig)), timeout_(timeout) {
  if (!stream_) {
    throw std::invalid_argument("external observer needs a connected stream");
  }
}

Observation ExternalObserver::observe(const WorldSnapshot& world) {
  return observe_external(world, *stream_, rig_, timeout_);
}

}  // namespace ncap

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ncap/geometry.hpp"
#include "ncap/scenario.hpp"
#include "ncap/wire.hpp"

namespace ncap {

struct CameraExtrinsic {
  double x{0.0}, y{0.0}, z{0.0};
  double yaw{0.0}, pitch{0.0}, roll{0.0};

  bool operator==(const CameraExtrinsic&) const = default;
};

struct CameraIntrinsic {
  double fx{0.0}, fy{0.0}, cx{0.0}, cy{0.0};
  int width{0}, height{0};

  bool operator==(const CameraIntrinsic&) const = default;
};

struct CameraSpec {
  std::string camera_id;
  CameraExtrinsic extrinsic;  ///< relative to the ego footprint center
  CameraIntrinsic intrinsic;

  bool operator==(const CameraSpec&) const = default;
};

using CameraRig = std::vector<CameraSpec>;

/// Six-camera surround rig laid out like the nuScenes collection vehicle.
CameraRig default_camera_rig();

using SensorPayload = std::map<std::string, std::vector<std::uint8_t>>;

struct Observation {
  double time{0.0};
  EgoState ego;
  HighLevelCommand command{HighLevelCommand::kStraight};
  std::vector<ActorState> objects;
  std::optional<CameraRig> camera_rig;
  SensorPayload sensor_payload;

  bool operator==(const Observation&) const = default;
};

/// Range bins [5, 15], (15, 25], (25, 35] m; boundaries belong to the lower bin.
constexpr std::array<double, 4> kRangeBinEdges{5.0, 15.0, 25.0, 35.0};

/// Bin index 0..2, or -1 outside all bins.
int range_bin(double range);

struct PerceptionNoiseModel {
  double position_sigma{0.0};
  double heading_sigma{0.0};
  double velocity_sigma{0.0};
  std::array<double, 3> dropout{0.0, 0.0, 0.0};  ///< per range bin
  double dropout_outside_bins{0.0};
  double detection_range{50.0};

  double dropout_at(double range) const;
  bool operator==(const PerceptionNoiseModel&) const = default;
};

/// Throws std::invalid_argument on probabilities outside [0, 1] or negative sigmas.
void validate(const PerceptionNoiseModel& noise);

/// Simulator state handed to observation providers.
struct WorldSnapshot {
  double time{0.0};
  EgoState ego;
  std::vector<ActorState> actors;
  const Route* route{nullptr};
};

/// Ground-truth objects within range with per-actor dropout and Gaussian
/// perturbation drawn from `rng`. Draws are consumed in actor order.
Observation observe_ground_truth(const WorldSnapshot& world, const PerceptionNoiseModel& noise,
                                 std::mt19937_64& rng);

class Observer {
 public:
  virtual ~Observer() = default;
  virtual Observation observe(const WorldSnapshot& world) = 0;
};

class GroundTruthObserver : public Observer {
 public:
  GroundTruthObserver(PerceptionNoiseModel noise, std::uint64_t seed);
  Observation observe(const WorldSnapshot& world) override;

 private:
  PerceptionNoiseModel noise_;
  std::mt19937_64 rng_;
};

/// Render-bridge request for one simulation step.
nlohmann::json make_render_request(const WorldSnapshot& world, const CameraRig& rig);

/// Validates a render reply against the requested rig. Throws ProtocolError.
SensorPayload parse_render_reply(const nlohmann::json& reply, const CameraRig& rig);

/// Brokers observations to an external render server. The object list is
/// left empty; planners receive the opaque payloads instead.
class ExternalObserver : public Observer {
 public:
  ExternalObserver(std::unique_ptr<wire::ByteStream> stream, CameraRig rig,
                   std::chrono::milliseconds timeout = std::chrono::seconds(30));
  Observation observe(const WorldSnapshot& world) override;

 private:
  std::unique_ptr<wire::ByteStream> stream_;
  CameraRig rig_;
  std::chrono::milliseconds timeout_;
};

Observation observe_external(const WorldSnapshot& world, wire::ByteStream& stream, const CameraRig& rig,
                             std::chrono::milliseconds timeout);

}  // namespace ncap

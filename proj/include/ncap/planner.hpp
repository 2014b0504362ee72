#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncap/geometry.hpp"
#include "ncap/observation.hpp"
#include "ncap/scenario.hpp"
#include "ncap/vehicle_model.hpp"
#include "ncap/wire.hpp"

namespace ncap {

struct TimedControl {
  double time_offset{0.0};
  ControlInput input;

  bool operator==(const TimedControl&) const = default;
};

/// Planner output: either a trajectory for the controller or a control
/// sequence applied directly.
struct PlannerVerdict {
  std::optional<PlannedTrajectory> plan;
  std::optional<std::vector<TimedControl>> controls;
  double latency{0.0};  ///< informational only
  std::map<std::string, std::string> diagnostics;

  bool operator==(const PlannerVerdict&) const = default;
};

/// Exactly one of plan / controls; plan per validate_trajectory; control
/// offsets non-negative and strictly increasing. Throws std::invalid_argument.
void validate(const PlannerVerdict& verdict, double max_horizon = 3.0);

class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;
  virtual PlannerVerdict plan(const Observation& obs) = 0;
};

constexpr double kPlanSpacing = 0.5;
constexpr double kPlanHorizon = 3.0;

/// Extrapolates current speed along the current heading at 0.5 s spacing.
PlannerVerdict plan_constant_velocity(const Observation& obs);

/// Decelerates at `deceleration` (< 0) along the current heading until stop.
PlannedTrajectory braking_plan(const Observation& obs, double deceleration);

struct NaiveBaselineConfig {
  double corridor_half_width{2.0};  ///< m
  double corridor_time{2.0};        ///< s, corridor length is this times ego speed
  bool use_box_overlap{false};      ///< test box overlap instead of the box center
  double deceleration{-7.0};
  /// Once triggered, keep braking until standstill instead of re-testing
  /// the shrinking corridor at every replan.
  bool hold_until_stop{true};
};

/// True when some observed object occupies the braking corridor.
bool corridor_occupied(const Observation& obs, const NaiveBaselineConfig& cfg);

PlannerVerdict plan_naive_baseline(const Observation& obs, const NaiveBaselineConfig& cfg = {});

struct OracleConfig {
  double lateral_shift{3.5};   ///< m to the right of the ego lane
  double shift_duration{2.0};  ///< s
  double deceleration{-7.0};
};

/// Privileged reference planner with access to the true instance.
PlannerVerdict plan_scripted_oracle(const Observation& obs, const ScenarioInstance& instance,
                                    const OracleConfig& cfg = {});

struct OccupancyEntry {
  double time_offset{0.0};
  OrientedBox box;
};

struct PostprocessConfig {
  double anchor_weight{1.0};
  double obstacle_weight{100.0};
  double clearance{0.05};       ///< penalty starts this far outside the inflated box
  bool inflate_extent{true};    ///< grow boxes by half the ego width plus margin
  double ego_half_width{0.865};
  double margin{0.1};
  double step_size{0.004};
  int iterations{500};
};

double inflation(const PostprocessConfig& cfg);

/// Penetration depth of `p` into `box`: positive inside, distance along the
/// nearest exit axis.
double penetration_depth(const Vec2& p, const OrientedBox& box);

/// Each waypoint is displaced on its own by gradient descent on
/// anchor + penetration penalties of the occupancy entries sharing its time
/// offset. Neighboring waypoints are not coupled. Ties in the exit
/// direction go toward the side of the box holding the plan origin.
PlannedTrajectory postprocess_waypoints(const PlannedTrajectory& plan, const std::vector<OccupancyEntry>& occupancy,
                                        const PostprocessConfig& cfg = {});

/// Observed objects extrapolated at constant velocity to each waypoint time.
std::vector<OccupancyEntry> predict_occupancy(const Observation& obs, const PlannedTrajectory& plan);

class ConstantVelocityPlanner : public Planner {
 public:
  std::string name() const override { return "constant-velocity"; }
  PlannerVerdict plan(const Observation& obs) override { return plan_constant_velocity(obs); }
};

class NaiveBaselinePlanner : public Planner {
 public:
  explicit NaiveBaselinePlanner(NaiveBaselineConfig cfg = {}) : cfg_(cfg) {}
  std::string name() const override { return "naive"; }
  PlannerVerdict plan(const Observation& obs) override;

 private:
  NaiveBaselineConfig cfg_;
  bool braking_{false};
};

class ScriptedOraclePlanner : public Planner {
 public:
  explicit ScriptedOraclePlanner(ScenarioInstance instance, OracleConfig cfg = {})
      : instance_(std::move(instance)), cfg_(cfg) {}
  std::string name() const override { return "oracle"; }
  PlannerVerdict plan(const Observation& obs) override { return plan_scripted_oracle(obs, instance_, cfg_); }

 private:
  ScenarioInstance instance_;
  OracleConfig cfg_;
};

/// Runs the inner planner and post-processes its waypoints against
/// predicted occupancy. Records raw and processed heading discontinuity.
class PostProcessingPlanner : public Planner {
 public:
  PostProcessingPlanner(std::unique_ptr<Planner> inner, PostprocessConfig cfg = {});
  std::string name() const override;
  PlannerVerdict plan(const Observation& obs) override;

 private:
  std::unique_ptr<Planner> inner_;
  PostprocessConfig cfg_;
};

enum class Capability { kWaypoints, kControls };

std::string to_string(Capability c);

// Planner bridge messages. Keys are documented in docs/wire_protocol.md.
nlohmann::json make_hello(int version = wire::kProtocolVersion);
nlohmann::json make_hello_reply(Capability capability, int version = wire::kProtocolVersion);
nlohmann::json make_error(const std::string& message);
nlohmann::json encode_step(const Observation& obs);
Observation decode_step(const nlohmann::json& msg);
nlohmann::json encode_verdict(const PlannerVerdict& verdict);
/// Rebuilds the verdict for `obs` and enforces its invariants. Throws ProtocolError.
PlannerVerdict decode_verdict(const nlohmann::json& msg, const Observation& obs, double max_horizon = kPlanHorizon);

/// Planner living behind a byte stream. The handshake happens on
/// construction; an unknown version or error reply is a clean refusal
/// raised as ProtocolError.
class ExternalPlanner : public Planner {
 public:
  ExternalPlanner(std::unique_ptr<wire::ByteStream> stream, std::chrono::milliseconds timeout = std::chrono::seconds(30),
                  std::string name = "external");
  ~ExternalPlanner() override;
  std::string name() const override { return name_; }
  PlannerVerdict plan(const Observation& obs) override;
  Capability capability() const { return capability_; }

 private:
  std::unique_ptr<wire::ByteStream> stream_;
  std::chrono::milliseconds timeout_;
  std::string name_;
  Capability capability_{Capability::kWaypoints};
};

/// Serves `planner` over `stream` until a bye message or disconnect.
/// Returns the number of step messages answered.
int serve_planner(wire::ByteStream& stream, Planner& planner,
                  std::chrono::milliseconds timeout = std::chrono::seconds(30));

}  // namespace ncap

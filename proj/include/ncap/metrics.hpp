#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncap/geometry.hpp"
#include "ncap/observation.hpp"
#include "ncap/scenario.hpp"
#include "ncap/simulation.hpp"
#include "ncap/vehicle_model.hpp"

namespace ncap {

/// 5 without a collision, otherwise 4 * max(0, 1 - v_i / v_r).
/// Throws ScoringError when v_r <= 0.
double nns(bool collided, double impact_speed, double reference_impact_speed);
double nns(const RunLog& log);

struct RunScore {
  std::string scenario;
  ScenarioType type{ScenarioType::kStationary};
  int run_index{0};
  Termination termination{Termination::kHorizonReached};
  bool collided{false};
  double impact_speed{0.0};
  double reference_impact_speed{0.0};
  double nns{0.0};  ///< 0 for transport failures, which are excluded from every aggregate

  bool transport_failure() const { return termination == Termination::kTransportFailure; }
  bool operator==(const RunScore&) const = default;
};

RunScore score_run(const RunLog& log);

/// Fraction of runs with a collision. Throws ScoringError on an empty input
/// or when a transport failure is included.
double collision_rate(const std::vector<RunScore>& runs);
double pass_rate(const std::vector<RunScore>& runs);

struct Aggregate {
  int runs{0};
  int transport_failures{0};
  double mean_nns{0.0};
  double collision_rate{0.0};

  bool operator==(const Aggregate&) const = default;
};

struct ScoreCard {
  std::vector<RunScore> runs;                     ///< sorted by (scenario, run_index)
  std::map<std::string, Aggregate> scenarios;
  std::map<ScenarioType, Aggregate> types;
  Aggregate overall;                              ///< means over the type aggregates present
  int transport_failures{0};

  bool operator==(const ScoreCard&) const = default;
};

ScoreCard build_scorecard(std::vector<RunScore> runs);

nlohmann::json scorecard_to_json(const ScoreCard& card);
ScoreCard scorecard_from_json(const nlohmann::json& j);
/// Flat table: one header line and one row, averages then stationary,
/// frontal and side, each as NNS and collision rate in percent.
std::string summary_csv(const ScoreCard& card);

// Open-loop planning metrics.

/// One evaluation frame. Ground truth is keyed by waypoint time offset.
struct OpenLoopFrame {
  PlannedTrajectory plan;
  std::map<double, Pose2> ego_truth;
  std::map<double, std::vector<OrientedBox>> actor_truth;
};

constexpr std::array<double, 3> kOpenLoopHorizons{1.0, 2.0, 3.0};

struct OpenLoopResult {
  std::array<double, 3> ade{};  ///< m, per horizon
  std::array<double, 3> cr{};   ///< fraction of frames, per horizon
  int frames_used{0};
  int frames_skipped{0};
};

/// CR uses the ego footprint at each waypoint pose only.
OpenLoopResult open_loop_ade_cr(const std::vector<OpenLoopFrame>& frames, const VehicleParams& vehicle);

// Target-actor recall.

constexpr std::array<double, 4> kRecallHorizons{0.0, 1.0, 2.0, 3.0};
constexpr double kRecallCenterDistance = 2.0;

struct RecallFrame {
  double range{0.0};  ///< ego-target center distance at the frame time
  std::array<OrientedBox, 4> target;
  std::array<std::vector<OrientedBox>, 4> candidates;
};

struct RecallTable {
  std::array<std::array<int, 3>, 4> recalled{};
  std::array<std::array<int, 3>, 4> total{};

  /// NaN for an empty cell.
  double recall(std::size_t horizon, std::size_t bin) const;
};

/// Non-zero overlap or center distance below 2 m.
bool recalled(const OrientedBox& target, const std::vector<OrientedBox>& candidates);

RecallTable target_recall(const std::vector<RecallFrame>& frames);

/// Frames from every planner tick of a run: the observed objects,
/// extrapolated at constant velocity, against the true target track.
std::vector<RecallFrame> recall_frames_from_run(const RunLog& log);

}  // namespace ncap

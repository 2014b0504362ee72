#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ncap/errors.hpp"
#include "ncap/metrics.hpp"
#include "spec_builders.hpp"

using namespace ncap;

namespace {

RunScore score(const std::string& scenario, ScenarioType type, int index, bool collided, double vi, double vr) {
  RunScore s;
  s.scenario = scenario;
  s.type = type;
  s.run_index = index;
  s.termination = collided ? Termination::kCollision : Termination::kHorizonReached;
  s.collided = collided;
  s.impact_speed = collided ? vi : 0.0;
  s.reference_impact_speed = vr;
  s.nns = nns(collided, vi, vr);
  return s;
}

RunScore failed(const std::string& scenario, ScenarioType type, int index) {
  RunScore s;
  s.scenario = scenario;
  s.type = type;
  s.run_index = index;
  s.termination = Termination::kTransportFailure;
  s.reference_impact_speed = 10.0;
  return s;
}

// Straight plan at 10 m/s, waypoints every 0.5 s.
OpenLoopFrame straight_frame(double truth_offset) {
  OpenLoopFrame f;
  for (int i = 1; i <= 6; ++i) {
    const double t = 0.5 * i;
    f.plan.waypoints.push_back({t, Pose2{10.0 * t, 0.0, 0.0}, 10.0});
    f.ego_truth[t] = Pose2{10.0 * t, truth_offset, 0.0};
  }
  return f;
}

}  // namespace

TEST(Nns, Examples) {
  EXPECT_EQ(nns(false, 0.0, 10.0), 5.0);
  EXPECT_EQ(nns(true, 0.0, 10.0), 4.0);
  EXPECT_EQ(nns(true, 5.0, 10.0), 2.0);
  EXPECT_EQ(nns(true, 10.0, 10.0), 0.0);
  EXPECT_EQ(nns(true, 15.0, 10.0), 0.0);
  EXPECT_THROW(nns(true, 1.0, 0.0), ScoringError);
  EXPECT_THROW(nns(false, 0.0, -1.0), ScoringError);
}

TEST(Nns, GridMatchesDirectEvaluation) {
  for (int i = 0; i < 1000; ++i) {
    const bool hit = i % 4 != 0;
    const double vr = 1.0 + (i % 37) * 0.75;
    const double vi = (i % 53) * 0.5;
    const double direct = hit ? 4.0 * std::max(0.0, 1.0 - vi / vr) : 5.0;
    ASSERT_EQ(nns(hit, vi, vr), direct) << i;
  }
}

TEST(Nns, MonotoneAndScaleInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 30.0);
  for (int i = 0; i < 500; ++i) {
    const double vr = u(rng);
    const double a = u(rng), b = u(rng);
    EXPECT_GE(nns(true, std::min(a, b), vr), nns(true, std::max(a, b), vr));
    EXPECT_LE(nns(true, a, vr), nns(false, 0.0, vr));
    // Doubling both speeds is exact in binary.
    EXPECT_EQ(nns(true, 2.0 * a, 2.0 * vr), nns(true, a, vr));
    const double s = nns(true, a, vr);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 4.0);
  }
}

TEST(CollisionRate, FractionOfRuns) {
  std::vector<RunScore> runs;
  for (int i = 0; i < 1000; ++i) runs.push_back(score("s", ScenarioType::kFrontal, i, i < 687, 3.0, 10.0));
  EXPECT_DOUBLE_EQ(collision_rate(runs), 0.687);
  EXPECT_DOUBLE_EQ(pass_rate(runs), 1.0 - 0.687);
  EXPECT_THROW(collision_rate({}), ScoringError);
  runs.push_back(failed("s", ScenarioType::kFrontal, 1000));
  EXPECT_THROW(collision_rate(runs), ScoringError);
}

TEST(ScoreCard, AggregatesExcludeTransportFailures) {
  std::vector<RunScore> runs{
      score("b_frontal", ScenarioType::kFrontal, 1, true, 5.0, 10.0),   // 2.0
      score("b_frontal", ScenarioType::kFrontal, 0, false, 0.0, 10.0),  // 5.0
      score("a_stat", ScenarioType::kStationary, 0, true, 0.0, 10.0),   // 4.0
      failed("a_stat", ScenarioType::kStationary, 1),
  };
  const auto card = build_scorecard(runs);
  ASSERT_EQ(card.runs.size(), 4u);
  EXPECT_EQ(card.runs[0].scenario, "a_stat");
  EXPECT_EQ(card.runs[1].run_index, 1);
  EXPECT_EQ(card.runs[2].scenario, "b_frontal");
  EXPECT_EQ(card.runs[2].run_index, 0);
  EXPECT_EQ(card.transport_failures, 1);

  const auto& stat = card.types.at(ScenarioType::kStationary);
  EXPECT_EQ(stat.runs, 2);
  EXPECT_EQ(stat.transport_failures, 1);
  EXPECT_EQ(stat.mean_nns, 4.0);
  EXPECT_EQ(stat.collision_rate, 1.0);
  const auto& frontal = card.scenarios.at("b_frontal");
  EXPECT_EQ(frontal.mean_nns, 3.5);
  EXPECT_EQ(frontal.collision_rate, 0.5);
  EXPECT_FALSE(card.types.count(ScenarioType::kSide));
  // Overall averages the type aggregates present.
  EXPECT_EQ(card.overall.mean_nns, 3.75);
  EXPECT_EQ(card.overall.collision_rate, 0.75);
}

TEST(ScoreCard, JsonRoundTripAndCsv) {
  std::vector<RunScore> runs{score("f", ScenarioType::kFrontal, 0, true, 1.0 / 3.0, 7.0),
                             score("s", ScenarioType::kSide, 0, false, 0.0, 11.0),
                             score("s", ScenarioType::kSide, 1, true, 2.0, 11.0)};
  const auto card = build_scorecard(runs);
  const auto j = scorecard_to_json(card);
  EXPECT_EQ(j.at("schema"), "ncap.scorecard/1");
  const auto back = scorecard_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(scorecard_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.runs, card.runs);
  EXPECT_THROW(scorecard_from_json(nlohmann::json{{"runs", 3}}), ConfigError);

  const auto csv = summary_csv(card);
  const auto header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(header, "avg_nns,avg_cr_pct,stationary_nns,stationary_cr_pct,frontal_nns,frontal_cr_pct,side_nns,side_cr_pct");
  const auto row = csv.substr(header.size() + 1);
  // Missing stationary columns stay empty.
  EXPECT_NE(row.find(",,,"), std::string::npos);
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 7);
}

TEST(OpenLoop, AdeExamples) {
  VehicleParams vehicle;
  auto r = open_loop_ade_cr({straight_frame(0.0)}, vehicle);
  EXPECT_EQ(r.frames_used, 1);
  for (double a : r.ade) EXPECT_EQ(a, 0.0);
  r = open_loop_ade_cr({straight_frame(1.0), straight_frame(0.0)}, vehicle);
  for (double a : r.ade) EXPECT_DOUBLE_EQ(a, 0.5);
  r = open_loop_ade_cr({straight_frame(1.0)}, vehicle);
  for (double a : r.ade) EXPECT_DOUBLE_EQ(a, 1.0);
}

TEST(OpenLoop, FramesWithoutTruthAreSkipped) {
  auto f = straight_frame(0.0);
  f.ego_truth.erase(1.5);
  const auto r = open_loop_ade_cr({f, straight_frame(0.0)}, VehicleParams{});
  EXPECT_EQ(r.frames_used, 1);
  EXPECT_EQ(r.frames_skipped, 1);
}

TEST(OpenLoop, CollisionRateByHorizon) {
  auto f = straight_frame(0.0);
  // Actor on the waypoint at 2.5 s only.
  f.actor_truth[2.5] = {OrientedBox{Pose2{25.0, 0.0, 0.0}, 4.5, 1.9}};
  const auto r = open_loop_ade_cr({f}, VehicleParams{});
  EXPECT_EQ(r.cr[0], 0.0);
  EXPECT_EQ(r.cr[1], 0.0);
  EXPECT_EQ(r.cr[2], 1.0);
}

TEST(OpenLoop, CollisionRateMonotoneInHorizon) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lat(-4.0, 4.0);
  std::uniform_int_distribution<int> slot(1, 6);
  std::vector<OpenLoopFrame> frames;
  for (int i = 0; i < 100; ++i) {
    auto f = straight_frame(0.0);
    const double t = 0.5 * slot(rng);
    f.actor_truth[t] = {OrientedBox{Pose2{10.0 * t, lat(rng), 0.3}, 4.5, 1.9}};
    frames.push_back(f);
  }
  const auto r = open_loop_ade_cr(frames, VehicleParams{});
  EXPECT_LE(r.cr[0], r.cr[1]);
  EXPECT_LE(r.cr[1], r.cr[2]);
  EXPECT_GT(r.cr[2], 0.0);
}

TEST(Recall, MatchRule) {
  const OrientedBox target{Pose2{20.0, 0.0, 0.0}, 4.5, 1.9};
  EXPECT_TRUE(recalled(target, {OrientedBox{Pose2{20.0, 1.9, 0.0}, 0.1, 0.1}}));
  EXPECT_FALSE(recalled(target, {OrientedBox{Pose2{20.0, 2.5, 0.0}, 0.1, 0.1}}));
  // Centers 3 m apart but the boxes overlap.
  EXPECT_TRUE(recalled(target, {OrientedBox{Pose2{23.0, 0.0, 0.0}, 4.5, 1.9}}));
  EXPECT_FALSE(recalled(target, {}));
}

TEST(Recall, TableBinsAndEmptyCells) {
  RecallFrame near;
  near.range = 10.0;
  RecallFrame far;
  far.range = 30.0;
  for (std::size_t h = 0; h < 4; ++h) {
    near.target[h] = far.target[h] = OrientedBox{Pose2{10.0, 0.0, 0.0}, 4.5, 1.9};
    near.candidates[h] = {near.target[h]};
  }
  RecallFrame outside = near;
  outside.range = 40.0;
  const auto table = target_recall({near, far, outside});
  EXPECT_EQ(table.recall(0, 0), 1.0);
  EXPECT_EQ(table.recall(3, 2), 0.0);
  EXPECT_TRUE(std::isnan(table.recall(1, 1)));
  EXPECT_EQ(table.total[0][0], 1);
}

TEST(Recall, PerfectAtZeroNoise) {
  const auto spec = fixtures::corpus().front();
  const auto inst = instantiate_run(spec, 0);
  ConstantVelocityPlanner planner;
  GroundTruthObserver observer({}, 1);
  const auto log = run_scenario(inst, planner, observer);
  const auto table = target_recall(recall_frames_from_run(log));
  int cells = 0;
  for (std::size_t h = 0; h < 4; ++h) {
    for (std::size_t b = 0; b < 3; ++b) {
      if (table.total[h][b] == 0) continue;
      ++cells;
      EXPECT_EQ(table.recall(h, b), 1.0) << h << " " << b;
    }
  }
  EXPECT_GT(cells, 0);
}

TEST(ScoreRun, TransportFailureScoresZeroAndIsFlagged) {
  RunLog log;
  log.instance.reference_impact_speed = 10.0;
  log.termination = Termination::kTransportFailure;
  const auto s = score_run(log);
  EXPECT_TRUE(s.transport_failure());
  EXPECT_EQ(s.nns, 0.0);
  EXPECT_THROW(nns(log), ScoringError);
}

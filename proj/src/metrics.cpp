#include "ncap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ncap/errors.hpp"
#include "ncap/serialization.hpp"

namespace ncap {

double nns(bool collided, double impact_speed, double reference_impact_speed) {
  if (!(reference_impact_speed > 0.0)) {
    throw ScoringError("reference impact speed must be positive");
  }
  if (!collided) {
    return 5.0;
  }
  return 4.0 * std::max(0.0, 1.0 - impact_speed / reference_impact_speed);
}

double nns(const RunLog& log) {
  if (log.termination == Termination::kTransportFailure) {
    throw ScoringError("cannot score a run that ended in a transport failure");
  }
  const bool hit = log.collision.has_value();
  return nns(hit, hit ? log.collision->impact_speed : 0.0, log.instance.reference_impact_speed);
}

RunScore score_run(const RunLog& log) {
  RunScore s;
  s.scenario = log.instance.scenario_name;
  s.type = log.instance.type;
  s.run_index = log.instance.run_index;
  s.termination = log.termination;
  s.collided = log.collision.has_value();
  s.impact_speed = s.collided ? log.collision->impact_speed : 0.0;
  s.reference_impact_speed = log.instance.reference_impact_speed;
  s.nns = s.transport_failure() ? 0.0 : nns(log);
  return s;
}

namespace {

void require_scorable(const std::vector<RunScore>& runs) {
  if (runs.empty()) {
    throw ScoringError("collision rate of an empty run set is undefined");
  }
  for (const auto& r : runs) {
    if (r.transport_failure()) {
      throw ScoringError("transport failures must be excluded before scoring");
    }
  }
}

Aggregate aggregate(const std::vector<const RunScore*>& runs) {
  Aggregate a;
  a.runs = static_cast<int>(runs.size());
  double sum = 0.0;
  int valid = 0;
  int hits = 0;
  for (const RunScore* r : runs) {
    if (r->transport_failure()) {
      ++a.transport_failures;
      continue;
    }
    ++valid;
    sum += r->nns;
    hits += r->collided ? 1 : 0;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  a.mean_nns = valid > 0 ? sum / valid : nan;
  a.collision_rate = valid > 0 ? static_cast<double>(hits) / valid : nan;
  return a;
}

double read_number(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

json aggregate_to_json(const Aggregate& a) {
  return json{{"runs", a.runs},
              {"transport_failures", a.transport_failures},
              {"mean_nns", a.mean_nns},
              {"collision_rate", a.collision_rate}};
}

Aggregate aggregate_from_json(const json& j) {
  Aggregate a;
  a.runs = j.at("runs").get<int>();
  a.transport_failures = j.at("transport_failures").get<int>();
  a.mean_nns = read_number(j.at("mean_nns"));
  a.collision_rate = read_number(j.at("collision_rate"));
  return a;
}

}  // namespace

double collision_rate(const std::vector<RunScore>& runs) {
  require_scorable(runs);
  const auto hits = std::count_if(runs.begin(), runs.end(), [](const RunScore& r) { return r.collided; });
  return static_cast<double>(hits) / static_cast<double>(runs.size());
}

double pass_rate(const std::vector<RunScore>& runs) { return 1.0 - collision_rate(runs); }

ScoreCard build_scorecard(std::vector<RunScore> runs) {
  std::sort(runs.begin(), runs.end(), [](const RunScore& a, const RunScore& b) {
    return a.scenario != b.scenario ? a.scenario < b.scenario : a.run_index < b.run_index;
  });
  ScoreCard card;
  card.runs = std::move(runs);
  std::map<std::string, std::vector<const RunScore*>> by_scenario;
  std::map<ScenarioType, std::vector<const RunScore*>> by_type;
  std::vector<const RunScore*> all;
  for (const auto& r : card.runs) {
    by_scenario[r.scenario].push_back(&r);
    by_type[r.type].push_back(&r);
    all.push_back(&r);
    card.transport_failures += r.transport_failure() ? 1 : 0;
  }
  for (const auto& [name, list] : by_scenario) card.scenarios[name] = aggregate(list);
  for (const auto& [type, list] : by_type) card.types[type] = aggregate(list);

  card.overall = aggregate(all);
  // Headline numbers average the per-type results, as in the summary table.
  double nns_sum = 0.0, cr_sum = 0.0;
  int n = 0;
  for (const auto& [type, agg] : card.types) {
    if (std::isnan(agg.mean_nns)) continue;
    nns_sum += agg.mean_nns;
    cr_sum += agg.collision_rate;
    ++n;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  card.overall.mean_nns = n > 0 ? nns_sum / n : nan;
  card.overall.collision_rate = n > 0 ? cr_sum / n : nan;
  return card;
}

json scorecard_to_json(const ScoreCard& card) {
  json runs = json::array();
  for (const auto& r : card.runs) {
    runs.push_back(json{{"scenario", r.scenario},
                        {"type", to_string(r.type)},
                        {"run_index", r.run_index},
                        {"termination", to_string(r.termination)},
                        {"collided", r.collided},
                        {"impact_speed", r.impact_speed},
                        {"reference_impact_speed", r.reference_impact_speed},
                        {"nns", r.nns}});
  }
  json scenarios = json::object();
  for (const auto& [name, agg] : card.scenarios) scenarios[name] = aggregate_to_json(agg);
  json types = json::object();
  for (const auto& [type, agg] : card.types) types[to_string(type)] = aggregate_to_json(agg);
  return json{{"schema", "ncap.scorecard/1"},
              {"runs", runs},
              {"scenarios", scenarios},
              {"types", types},
              {"overall", aggregate_to_json(card.overall)},
              {"transport_failures", card.transport_failures}};
}

ScoreCard scorecard_from_json(const json& j) {
  ScoreCard card;
  try {
    for (const auto& r : j.at("runs")) {
      RunScore s;
      s.scenario = r.at("scenario").get<std::string>();
      s.type = scenario_type_from_string(r.at("type").get<std::string>());
      s.run_index = r.at("run_index").get<int>();
      s.termination = termination_from_string(r.at("termination").get<std::string>());
      s.collided = r.at("collided").get<bool>();
      s.impact_speed = r.at("impact_speed").get<double>();
      s.reference_impact_speed = r.at("reference_impact_speed").get<double>();
      s.nns = r.at("nns").get<double>();
      card.runs.push_back(std::move(s));
    }
    for (const auto& [name, a] : j.at("scenarios").items()) card.scenarios[name] = aggregate_from_json(a);
    for (const auto& [name, a] : j.at("types").items()) card.types[scenario_type_from_string(name)] = aggregate_from_json(a);
    card.overall = aggregate_from_json(j.at("overall"));
    card.transport_failures = j.at("transport_failures").get<int>();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("malformed score card: ") + e.what());
  }
  return card;
}

std::string summary_csv(const ScoreCard& card) {
  auto cell = [](double v) {
    if (std::isnan(v)) return std::string();
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };
  std::string out = "avg_nns,avg_cr_pct,stationary_nns,stationary_cr_pct,frontal_nns,frontal_cr_pct,side_nns,side_cr_pct\n";
  out += cell(card.overall.mean_nns) + "," + cell(100.0 * card.overall.collision_rate);
  for (ScenarioType t : {ScenarioType::kStationary, ScenarioType::kFrontal, ScenarioType::kSide}) {
    auto it = card.types.find(t);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const Aggregate a = it == card.types.end() ? Aggregate{0, 0, nan, nan} : it->second;
    out += "," + cell(a.mean_nns) + "," + cell(100.0 * a.collision_rate);
  }
  out += "\n";
  return out;
}

namespace {

template <typename T>
const T* lookup(const std::map<double, T>& m, double t) {
  constexpr double kTol = 1e-9;
  auto it = m.lower_bound(t - kTol);
  if (it == m.end() || it->first > t + kTol) return nullptr;
  return &it->second;
}

}  // namespace

OpenLoopResult open_loop_ade_cr(const std::vector<OpenLoopFrame>& frames, const VehicleParams& vehicle) {
  OpenLoopResult out;
  const double max_h = kOpenLoopHorizons.back();
  std::array<double, 3> ade_sum{}, cr_sum{};
  for (const auto& f : frames) {
    bool usable = !f.plan.waypoints.empty() && f.plan.waypoints.front().time_offset <= kOpenLoopHorizons.front();
    for (const auto& wp : f.plan.waypoints) {
      if (wp.time_offset <= max_h + 1e-9 && lookup(f.ego_truth, wp.time_offset) == nullptr) usable = false;
    }
    if (!usable) {
      ++out.frames_skipped;
      continue;
    }
    ++out.frames_used;
    for (std::size_t h = 0; h < kOpenLoopHorizons.size(); ++h) {
      const double T = kOpenLoopHorizons[h] + 1e-9;
      double disp = 0.0;
      int n = 0;
      bool hit = false;
      for (const auto& wp : f.plan.waypoints) {
        if (wp.time_offset > T) break;
        disp += (wp.pose.position() - lookup(f.ego_truth, wp.time_offset)->position()).norm();
        ++n;
        if (const auto* boxes = lookup(f.actor_truth, wp.time_offset)) {
          const OrientedBox ego = ego_footprint(EgoState{wp.pose, 0.0, 0.0}, vehicle);
          for (const auto& b : *boxes) hit = hit || boxes_intersect(ego, b);
        }
      }
      ade_sum[h] += disp / n;
      cr_sum[h] += hit ? 1.0 : 0.0;
    }
  }
  for (std::size_t h = 0; h < 3; ++h) {
    out.ade[h] = out.frames_used > 0 ? ade_sum[h] / out.frames_used : 0.0;
    out.cr[h] = out.frames_used > 0 ? cr_sum[h] / out.frames_used : 0.0;
  }
  return out;
}

double RecallTable::recall(std::size_t horizon, std::size_t bin) const {
  const int n = total[horizon][bin];
  return n > 0 ? static_cast<double>(recalled[horizon][bin]) / n : std::numeric_limits<double>::quiet_NaN();
}

bool recalled(const OrientedBox& target, const std::vector<OrientedBox>& candidates) {
  for (const auto& c : candidates) {
    if (signed_separation(target, c) < 0.0) return true;
    if ((target.center.position() - c.center.position()).norm() < kRecallCenterDistance) return true;
  }
  return false;
}

RecallTable target_recall(const std::vector<RecallFrame>& frames) {
  RecallTable table;
  for (const auto& f : frames) {
    const int bin = range_bin(f.range);
    if (bin < 0) continue;
    for (std::size_t h = 0; h < kRecallHorizons.size(); ++h) {
      ++table.total[h][bin];
      if (recalled(f.target[h], f.candidates[h])) ++table.recalled[h][bin];
    }
  }
  return table;
}

std::vector<RecallFrame> recall_frames_from_run(const RunLog& log) {
  std::vector<RecallFrame> frames;
  for (const auto& tick : log.planner_ticks) {
    RecallFrame f;
    f.range = (log.instance.target.state_at(tick.time).box.center.position() - tick.ego.pose.position()).norm();
    for (std::size_t h = 0; h < kRecallHorizons.size(); ++h) {
      const double dt = kRecallHorizons[h];
      f.target[h] = log.instance.target.state_at(tick.time + dt).box;
      for (const auto& obj : tick.objects) {
        const Vec2 c = obj.box.center.position() + obj.velocity * dt;
        f.candidates[h].push_back(OrientedBox{Pose2{c.x, c.y, obj.box.center.heading}, obj.box.length, obj.box.width});
      }
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace ncap

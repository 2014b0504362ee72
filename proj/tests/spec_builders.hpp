#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "ncap/scenario.hpp"
#include "ncap/serialization.hpp"

namespace ncap::fixtures {

inline Route straight_route(double length, double speed) {
  return {{-200.0, 0.0, speed}, {length, 0.0, speed}};
}

// Ego at the origin heading +x; no jitter, no background.
inline ScenarioSpec bare_spec(ScenarioType type, double ego_speed = 10.0, double target_speed = 0.0) {
  ScenarioSpec s;
  s.name = to_string(type) + "_bare";
  s.type = type;
  s.ego_init.speed = ego_speed;
  s.ego_route = straight_route(1000.0, ego_speed);
  s.target.speed = target_speed;
  s.runs = 10;
  s.seed = 42;
  return s;
}

inline std::vector<std::filesystem::path> corpus_files() {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(NCAP_SCENARIO_DIR)) {
    if (e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<ScenarioSpec> corpus() {
  std::vector<ScenarioSpec> out;
  for (const auto& f : corpus_files()) out.push_back(load_scenario(f));
  return out;
}

}  // namespace ncap::fixtures

#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ncap/controller.hpp"
#include "ncap/geometry.hpp"
#include "ncap/observation.hpp"
#include "ncap/scenario.hpp"
#include "ncap/vehicle_model.hpp"

namespace ncap {

using json = nlohmann::json;

void to_json(json& j, const Vec2& v);
void from_json(const json& j, Vec2& v);
void to_json(json& j, const Pose2& p);
void from_json(const json& j, Pose2& p);
void to_json(json& j, const EgoState& s);
void from_json(const json& j, EgoState& s);
void to_json(json& j, const OrientedBox& b);
void from_json(const json& j, OrientedBox& b);
void to_json(json& j, const ActorState& a);
void from_json(const json& j, ActorState& a);
void to_json(json& j, const Waypoint& w);
void from_json(const json& j, Waypoint& w);
void to_json(json& j, const PlannedTrajectory& t);
void from_json(const json& j, PlannedTrajectory& t);
void to_json(json& j, const ControlInput& u);
void from_json(const json& j, ControlInput& u);
void to_json(json& j, const VehicleParams& p);
void from_json(const json& j, VehicleParams& p);
void to_json(json& j, const LqrConfig& c);
void from_json(const json& j, LqrConfig& c);
void to_json(json& j, const RoutePoint& r);
void from_json(const json& j, RoutePoint& r);
void to_json(json& j, const Interval& i);
void from_json(const json& j, Interval& i);
void to_json(json& j, const JitterRanges& r);
void from_json(const json& j, JitterRanges& r);
void to_json(json& j, const TargetTemplate& t);
void from_json(const json& j, TargetTemplate& t);
void to_json(json& j, const ActorTrack& t);
void from_json(const json& j, ActorTrack& t);
void to_json(json& j, const ScenarioSpec& s);
void from_json(const json& j, ScenarioSpec& s);
void to_json(json& j, const RealizedJitter& r);
void from_json(const json& j, RealizedJitter& r);
void to_json(json& j, const ScenarioInstance& s);
void from_json(const json& j, ScenarioInstance& s);
void to_json(json& j, const CameraSpec& c);
void from_json(const json& j, CameraSpec& c);
void to_json(json& j, const PerceptionNoiseModel& n);
void from_json(const json& j, PerceptionNoiseModel& n);

/// Reads a scenario file. Missing optional fields take their defaults.
/// Throws ConfigError with the file name on parse or validation failure.
ScenarioSpec load_scenario(const std::filesystem::path& path);

json read_json_file(const std::filesystem::path& path);
/// Writes `text` atomically (temporary file + rename).
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace ncap

#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ncap/metrics.hpp"
#include "ncap/observation.hpp"
#include "ncap/planner.hpp"
#include "ncap/scenario.hpp"
#include "ncap/simulation.hpp"

namespace ncap {

struct SuiteConfig {
  std::vector<std::filesystem::path> scenarios;  ///< files or directories of *.json
  /// constant-velocity | naive | naive-overlap | oracle | tcp://host:port
  std::string planner{"constant-velocity"};
  bool postprocess{false};
  bool postprocess_inflate{true};
  /// ground-truth | tcp://host:port (render bridge)
  std::string observer{"ground-truth"};
  PerceptionNoiseModel noise;
  int jobs{1};
  std::filesystem::path output_dir{"ncap_out"};
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  SimConfig sim;
  std::optional<double> integration_substep;
  std::optional<LqrConfig> controller;
  std::chrono::milliseconds timeout{30000};
  bool write_runlogs{true};
};

/// Throws ConfigError on an invalid selection.
void validate(const SuiteConfig& cfg);

/// Scenario files named by the config, directories expanded and sorted.
/// Throws ConfigError on a missing path.
std::vector<std::filesystem::path> resolve_scenarios(const SuiteConfig& cfg);

/// Loaded scenario with the suite overrides applied.
ScenarioSpec apply_overrides(ScenarioSpec spec, const SuiteConfig& cfg);

bool is_endpoint(const std::string& selection);

std::unique_ptr<Planner> make_planner(const SuiteConfig& cfg, const ScenarioInstance& instance);
std::unique_ptr<Observer> make_observer(const SuiteConfig& cfg, const ScenarioInstance& instance);

/// Seed of the observation noise stream of an instance, independent of the
/// jitter stream.
std::uint64_t observation_seed(const ScenarioInstance& instance);

struct SuiteResult {
  ScoreCard card;
  std::vector<std::string> runlog_digests;  ///< FNV-1a of each serialized RunLog, in run order
  std::vector<std::string> fingerprints;
  std::vector<RunLog> logs;                 ///< only when requested
};

using RunSink = std::function<void(const RunLog&, const std::string& serialized)>;

/// Runs every (scenario, run_index) pair on `cfg.jobs` workers. Results are
/// ordered by (scenario file order, run_index) regardless of scheduling.
/// `sink` is called from worker threads.
SuiteResult run_suite(const std::vector<ScenarioSpec>& specs, const SuiteConfig& cfg, bool keep_logs = false,
                      const RunSink& sink = nullptr);

std::vector<ScenarioSpec> load_suite(const SuiteConfig& cfg);

/// Writes run logs, scorecard.json, summary.csv and index.json. Returns 0
/// iff no run ended in a transport failure; 2 on configuration errors,
/// before any file is written.
int cmd_run(const SuiteConfig& cfg, std::ostream& out, std::ostream& err);

struct ReplayOptions {
  std::filesystem::path runlog;
  std::optional<std::filesystem::path> export_dir;
  std::optional<std::filesystem::path> scorecard;  ///< compare against its entry
};

/// Verifies and rescores a run log; optionally exports flat time series.
int cmd_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err);

struct ValidationReport {
  int probes{0};
  int accepted{0};
  int draws{0};  ///< jitter draws including retries
  int retries{0};
  std::vector<std::pair<int, std::uint64_t>> offenders;  ///< (run_index, derived seed)
  std::vector<std::string> messages;

  double rejection_rate() const { return draws > 0 ? static_cast<double>(retries) / draws : 0.0; }
  bool passed() const { return offenders.empty(); }
};

ValidationReport validate_scenario(const ScenarioSpec& spec, int probes);

int cmd_validate(const std::filesystem::path& scenario, int probes, std::ostream& out, std::ostream& err);

}  // namespace ncap

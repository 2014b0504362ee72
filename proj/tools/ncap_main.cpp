#include <cstdlib>
#include <iostream>

#include "CLI11.hpp"
#include "ncap/suite.hpp"

namespace {

std::filesystem::path default_output_dir() {
  if (const char* env = std::getenv("NCAP_OUTPUT_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return "ncap_out";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop collision-scenario harness"};
  app.require_subcommand(1);

  ncap::SuiteConfig suite;
  std::string output;
  std::uint64_t seed = 0;
  int runs = 0;
  std::vector<double> dropout;
  double substep = 0.0;
  int timeout_ms = 30000;
  bool no_inflate = false;

  auto* run = app.add_subcommand("run", "Run scenarios and score the planner");
  run->add_option("-s,--scenarios", suite.scenarios, "Scenario files or directories")->required();
  run->add_option("-p,--planner", suite.planner,
                  "constant-velocity, naive, naive-overlap, oracle or tcp://host:port")
      ->capture_default_str();
  run->add_flag("--postprocess", suite.postprocess, "Post-process planner waypoints against predicted occupancy");
  run->add_flag("--no-extent-inflation", no_inflate, "Do not inflate occupancy by the ego extent");
  run->add_option("--observer", suite.observer, "ground-truth or tcp://host:port")->capture_default_str();
  run->add_option("--position-sigma", suite.noise.position_sigma, "Observation position noise, m");
  run->add_option("--heading-sigma", suite.noise.heading_sigma, "Observation heading noise, rad");
  run->add_option("--velocity-sigma", suite.noise.velocity_sigma, "Observation velocity noise, m/s");
  run->add_option("--dropout", dropout, "Dropout per range bin 5-15,15-25,25-35 m")->expected(3)->delimiter(',');
  run->add_option("--detection-range", suite.noise.detection_range, "Observation range, m");
  run->add_option("-j,--jobs", suite.jobs, "Parallel runs")->capture_default_str();
  run->add_option("-o,--output", output, "Output directory (default $NCAP_OUTPUT_DIR or ./ncap_out)");
  auto* seed_opt = run->add_option("--seed", seed, "Override every scenario seed");
  auto* runs_opt = run->add_option("--runs", runs, "Override runs per scenario");
  run->add_option("--physics-dt", suite.sim.physics_dt, "Physics step, s")->capture_default_str();
  run->add_option("--planner-period", suite.sim.planner_period, "Planner period, s")->capture_default_str();
  auto* substep_opt = run->add_option("--integration-substep", substep, "Vehicle-model RK4 substep, s");
  run->add_option("--timeout-ms", timeout_ms, "External endpoint timeout")->capture_default_str();
  run->add_flag("!--no-runlogs", suite.write_runlogs, "Skip writing per-run logs");

  ncap::ReplayOptions replay;
  std::string export_dir, scorecard;
  auto* rep = app.add_subcommand("replay", "Verify, rescore and export a run log");
  rep->add_option("runlog", replay.runlog, "Run log file")->required();
  rep->add_option("--export", export_dir, "Directory for CSV time series");
  rep->add_option("--scorecard", scorecard, "Score card to compare against");

  std::filesystem::path scenario;
  int probes = 100;
  auto* val = app.add_subcommand("validate", "Probe a scenario for feasibility");
  val->add_option("scenario", scenario, "Scenario file")->required();
  val->add_option("-n,--probes", probes, "Number of probe runs")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    suite.output_dir = output.empty() ? default_output_dir() : std::filesystem::path(output);
    if (*seed_opt) suite.seed = seed;
    if (*runs_opt) suite.runs = runs;
    if (*substep_opt) suite.integration_substep = substep;
    if (dropout.size() == 3) suite.noise.dropout = {dropout[0], dropout[1], dropout[2]};
    suite.postprocess_inflate = !no_inflate;
    suite.timeout = std::chrono::milliseconds(timeout_ms);
    return ncap::cmd_run(suite, std::cout, std::cerr);
  }
  if (*rep) {
    if (!export_dir.empty()) replay.export_dir = export_dir;
    if (!scorecard.empty()) replay.scorecard = scorecard;
    return ncap::cmd_replay(replay, std::cout, std::cerr);
  }
  return ncap::cmd_validate(scenario, probes, std::cout, std::cerr);
}

#include "ncap/suite.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <thread>

#include "ncap/errors.hpp"
#include "ncap/serialization.hpp"

namespace ncap {

namespace fs = std::filesystem;

bool is_endpoint(const std::string& selection) {
  return selection.rfind("tcp://", 0) == 0;
}

void validate(const SuiteConfig& cfg) {
  static const std::vector<std::string> kBuiltins{"constant-velocity", "naive", "naive-overlap", "oracle"};
  if (!is_endpoint(cfg.planner) && std::find(kBuiltins.begin(), kBuiltins.end(), cfg.planner) == kBuiltins.end()) {
    throw ConfigError("unknown planner '" + cfg.planner + "'");
  }
  if (cfg.observer != "ground-truth" && !is_endpoint(cfg.observer)) {
    throw ConfigError("unknown observer '" + cfg.observer + "'");
  }
  if (is_endpoint(cfg.observer) && !is_endpoint(cfg.planner)) {
    throw ConfigError("an external observer delivers pixels only; it needs an external planner");
  }
  if (cfg.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (cfg.runs && *cfg.runs < 1) throw ConfigError("runs must be at least 1");
  if (cfg.scenarios.empty()) throw ConfigError("no scenarios given");
  try {
    validate(cfg.noise);
    validate(cfg.sim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<fs::path> resolve_scenarios(const SuiteConfig& cfg) {
  std::vector<fs::path> files;
  for (const auto& p : cfg.scenarios) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      if (found.empty()) throw ConfigError("no scenario files in " + p.string());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::is_regular_file(p)) {
      files.push_back(p);
    } else {
      throw ConfigError("scenario path not found: " + p.string());
    }
  }
  return files;
}

ScenarioSpec apply_overrides(ScenarioSpec spec, const SuiteConfig& cfg) {
  if (cfg.seed) spec.seed = *cfg.seed;
  if (cfg.runs) spec.runs = *cfg.runs;
  if (cfg.integration_substep) spec.vehicle.integration_substep = *cfg.integration_substep;
  if (cfg.controller) spec.controller = *cfg.controller;
  validate(spec);
  return spec;
}

std::vector<ScenarioSpec> load_suite(const SuiteConfig& cfg) {
  validate(cfg);
  std::vector<ScenarioSpec> specs;
  for (const auto& f : resolve_scenarios(cfg)) {
    try {
      specs.push_back(apply_overrides(load_scenario(f), cfg));
    } catch (const ScenarioError& e) {
      throw ConfigError(f.string() + ": " + e.what());
    }
  }
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  std::sort(names.begin(), names.end());
  if (std::adjacent_find(names.begin(), names.end()) != names.end()) {
    throw ConfigError("scenario names must be unique within a suite");
  }
  return specs;
}

std::uint64_t observation_seed(const ScenarioInstance& instance) {
  return derive_seed(instance.derived_seed, 0, static_cast<std::uint64_t>(SeedStream::kObservation));
}

std::unique_ptr<Planner> make_planner(const SuiteConfig& cfg, const ScenarioInstance& instance) {
  std::unique_ptr<Planner> planner;
  if (cfg.planner == "constant-velocity") {
    planner = std::make_unique<ConstantVelocityPlanner>();
  } else if (cfg.planner == "naive" || cfg.planner == "naive-overlap") {
    NaiveBaselineConfig nb;
    nb.use_box_overlap = cfg.planner == "naive-overlap";
    nb.deceleration = instance.vehicle.min_acceleration;
    planner = std::make_unique<NaiveBaselinePlanner>(nb);
  } else if (cfg.planner == "oracle") {
    OracleConfig oc;
    oc.deceleration = instance.vehicle.min_acceleration;
    planner = std::make_unique<ScriptedOraclePlanner>(instance, oc);
  } else if (is_endpoint(cfg.planner)) {
    const auto [host, port] = wire::parse_endpoint(cfg.planner);
    planner = std::make_unique<ExternalPlanner>(wire::TcpStream::connect(host, port, cfg.timeout), cfg.timeout,
                                                cfg.planner);
  } else {
    throw ConfigError("unknown planner '" + cfg.planner + "'");
  }
  if (cfg.postprocess) {
    PostprocessConfig pc;
    pc.inflate_extent = cfg.postprocess_inflate;
    pc.ego_half_width = 0.5 * instance.vehicle.width;
    planner = std::make_unique<PostProcessingPlanner>(std::move(planner), pc);
  }
  return planner;
}

std::unique_ptr<Observer> make_observer(const SuiteConfig& cfg, const ScenarioInstance& instance) {
  if (is_endpoint(cfg.observer)) {
    const auto [host, port] = wire::parse_endpoint(cfg.observer);
    return std::make_unique<ExternalObserver>(wire::TcpStream::connect(host, port, cfg.timeout), default_camera_rig(),
                                              cfg.timeout);
  }
  return std::make_unique<GroundTruthObserver>(cfg.noise, observation_seed(instance));
}

namespace {

std::string planner_label(const SuiteConfig& cfg) {
  return cfg.postprocess ? cfg.planner + "+postprocess" : cfg.planner;
}

RunLog failed_run(const ScenarioInstance& inst, const SuiteConfig& cfg, const std::string& why) {
  RunLog log;
  log.instance = inst;
  log.planner = planner_label(cfg);
  log.sim = cfg.sim;
  log.fingerprint = config_fingerprint(inst, log.planner, log.sim);
  log.termination = Termination::kTransportFailure;
  log.failure = why;
  return log;
}

}  // namespace

SuiteResult run_suite(const std::vector<ScenarioSpec>& specs, const SuiteConfig& cfg, bool keep_logs,
                      const RunSink& sink) {
  struct Job {
    std::size_t spec;
    int run;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (int r = 0; r < specs[s].runs; ++r) jobs.push_back({s, r});
  }
  std::vector<std::shared_ptr<GainCache>> caches;
  for (std::size_t s = 0; s < specs.size(); ++s) caches.push_back(std::make_shared<GainCache>());

  std::vector<RunScore> scores(jobs.size());
  std::vector<std::string> digests(jobs.size());
  std::vector<std::string> fingerprints(jobs.size());
  std::vector<RunLog> logs(keep_logs ? jobs.size() : 0);
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const ScenarioInstance inst = instantiate_run(specs[jobs[i].spec], jobs[i].run);
        RunLog log;
        try {
          auto planner = make_planner(cfg, inst);
          auto observer = make_observer(cfg, inst);
          log = run_scenario(inst, *planner, *observer, cfg.sim, caches[jobs[i].spec]);
        } catch (const TransportError& e) {
          log = failed_run(inst, cfg, std::string("transport: ") + e.what());
        } catch (const ProtocolError& e) {
          log = failed_run(inst, cfg, std::string("protocol: ") + e.what());
        }
        const std::string text = runlog_to_json(log).dump();
        digests[i] = hex64(fnv1a64(text));
        fingerprints[i] = log.fingerprint;
        scores[i] = score_run(log);
        if (sink) sink(log, text);
        if (keep_logs) logs[i] = std::move(log);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(jobs.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  SuiteResult result;
  result.card = build_scorecard(std::move(scores));
  result.runlog_digests = std::move(digests);
  result.fingerprints = std::move(fingerprints);
  result.logs = std::move(logs);
  return result;
}

namespace {

std::string runlog_relpath(const std::string& scenario, int run) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "run_%04d.json", run);
  return "runlogs/" + scenario + "/" + buf;
}

}  // namespace

int cmd_run(const SuiteConfig& cfg, std::ostream& out, std::ostream& err) {
  std::vector<ScenarioSpec> specs;
  try {
    specs = load_suite(cfg);
  } catch (const std::exception& e) {
    err << "ncap run: " << e.what() << "\n";
    return 2;
  }
  const fs::path root = cfg.output_dir;
  SuiteResult result;
  try {
    fs::create_directories(root);
    RunSink sink;
    if (cfg.write_runlogs) {
      sink = [&](const RunLog& log, const std::string& text) {
        write_text_file(root / runlog_relpath(log.instance.scenario_name, log.instance.run_index), text);
      };
    }
    result = run_suite(specs, cfg, false, sink);
  } catch (const std::exception& e) {
    err << "ncap run: " << e.what() << "\n";
    return 2;
  }
  const ScoreCard& card = result.card;
  json index{{"schema", "ncap.index/1"}, {"planner", planner_label(cfg)}, {"runs", json::array()}};
  for (std::size_t i = 0; i < card.runs.size(); ++i) {
    const RunScore& r = card.runs[i];
    json entry{{"scenario", r.scenario},
               {"run_index", r.run_index},
               {"termination", to_string(r.termination)},
               {"nns", r.nns}};
    if (cfg.write_runlogs) entry["path"] = runlog_relpath(r.scenario, r.run_index);
    index["runs"].push_back(entry);
  }
  // Fingerprints follow job order; attach them by (scenario, run).
  {
    std::size_t i = 0;
    std::map<std::pair<std::string, int>, std::string> fp;
    for (const auto& s : specs) {
      for (int r = 0; r < s.runs; ++r) fp[{s.name, r}] = result.fingerprints[i++];
    }
    for (auto& entry : index["runs"]) {
      entry["fingerprint"] = fp[{entry["scenario"].get<std::string>(), entry["run_index"].get<int>()}];
    }
  }
  write_text_file(root / "scorecard.json", scorecard_to_json(card).dump(2) + "\n");
  write_text_file(root / "summary.csv", summary_csv(card));
  write_text_file(root / "index.json", index.dump(2) + "\n");

  out << summary_csv(card);
  if (card.transport_failures > 0) {
    err << "ncap run: WARNING " << card.transport_failures
        << " run(s) ended in a transport failure and are excluded from the averages\n";
    return 1;
  }
  return 0;
}

namespace {

void export_csvs(const RunLog& log, const fs::path& dir) {
  std::string ticks = "time,x,y,heading,speed,steering,acceleration,fallback\n";
  std::string actors = "time,actor_id,x,y,heading,length,width,vx,vy\n";
  char buf[512];
  auto row_actors = [&](double t) {
    for (const auto& a : log.instance.actors_at(t)) {
      const Pose2& c = a.box.center;
      std::snprintf(buf, sizeof(buf), "%.17g,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, a.actor_id.c_str(),
                    c.x, c.y, c.heading, a.box.length, a.box.width, a.velocity.x, a.velocity.y);
      actors += buf;
    }
  };
  const EgoState& e0 = log.instance.ego_init;
  std::snprintf(buf, sizeof(buf), "0,%.17g,%.17g,%.17g,%.17g,,,\n", e0.pose.x, e0.pose.y, e0.pose.heading, e0.speed);
  ticks += buf;
  row_actors(0.0);
  for (const auto& t : log.ticks) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", t.time, t.ego.pose.x,
                  t.ego.pose.y, t.ego.pose.heading, t.ego.speed, t.control.steering, t.control.acceleration,
                  t.fallback ? 1 : 0);
    ticks += buf;
    row_actors(t.time);
  }
  std::string plans = "issued_at,live,index,time_offset,x,y,heading,speed\n";
  for (const auto& p : log.planner_ticks) {
    if (!p.verdict.plan) continue;
    const auto& wps = p.verdict.plan->waypoints;
    for (std::size_t i = 0; i < wps.size(); ++i) {
      const auto& w = wps[i];
      std::snprintf(buf, sizeof(buf), "%.17g,%d,%zu,%.17g,%.17g,%.17g,%.17g,", p.time, p.live ? 1 : 0, i,
                    w.time_offset, w.pose.x, w.pose.y, w.pose.heading);
      plans += buf;
      if (w.speed) {
        std::snprintf(buf, sizeof(buf), "%.17g", *w.speed);
        plans += buf;
      }
      plans += "\n";
    }
  }
  write_text_file(dir / "ego.csv", ticks);
  write_text_file(dir / "actors.csv", actors);
  write_text_file(dir / "plans.csv", plans);
}

}  // namespace

int cmd_replay(const ReplayOptions& opts, std::ostream& out, std::ostream& err) {
  RunLog log;
  RunScore score;
  try {
    log = runlog_from_json(read_json_file(opts.runlog));
    check_consistency(log);
    const double v_r = reference_impact_speed(log.instance);
    if (v_r != log.instance.reference_impact_speed) {
      throw ConfigError("reference impact speed does not reproduce from the instance");
    }
    score = score_run(log);
    if (opts.scorecard) {
      const ScoreCard card = scorecard_from_json(read_json_file(*opts.scorecard));
      auto it = std::find_if(card.runs.begin(), card.runs.end(), [&](const RunScore& r) {
        return r.scenario == score.scenario && r.run_index == score.run_index;
      });
      if (it == card.runs.end()) throw ConfigError("run not present in the score card");
      if (!(*it == score)) throw ConfigError("rescored run differs from the score card entry");
    }
    if (opts.export_dir) export_csvs(log, *opts.export_dir);
  } catch (const std::exception& e) {
    err << "ncap replay: refused: " << e.what() << "\n";
    return 1;
  }
  const json j{{"scenario", score.scenario},
               {"run_index", score.run_index},
               {"termination", to_string(score.termination)},
               {"collided", score.collided},
               {"impact_speed", score.impact_speed},
               {"reference_impact_speed", score.reference_impact_speed},
               {"nns", score.nns}};
  out << j.dump() << "\n";
  return 0;
}

ValidationReport validate_scenario(const ScenarioSpec& spec_in, int probes) {
  ScenarioSpec spec = spec_in;
  spec.runs = std::max(spec.runs, probes);
  ValidationReport rep;
  rep.probes = probes;
  for (int r = 0; r < probes; ++r) {
    const std::uint64_t seed = derive_seed(spec.seed, static_cast<std::uint64_t>(r));
    try {
      const ScenarioInstance inst = instantiate_run(spec, r);
      rep.draws += inst.attempts;
      rep.retries += inst.attempts - 1;
      const double v_r = reference_impact_speed(inst);
      const bool on_time = std::abs(inst.reference_contact_time - spec.ttc_init) <= spec.ttc_tolerance;
      const bool in_bounds = spec.jitter.longitudinal.contains(inst.jitter.longitudinal) &&
                             spec.jitter.lateral.contains(inst.jitter.lateral) &&
                             spec.jitter.rotation.contains(inst.jitter.rotation) &&
                             spec.jitter.speed.contains(inst.jitter.speed);
      if (!on_time || !(v_r > 0.0) || v_r != inst.reference_impact_speed || !in_bounds) {
        rep.offenders.emplace_back(r, seed);
        rep.messages.push_back("run " + std::to_string(r) + ": collision guarantee violated");
        continue;
      }
      ++rep.accepted;
    } catch (const ScenarioError& e) {
      rep.draws += spec.max_attempts;
      rep.retries += spec.max_attempts;
      rep.offenders.emplace_back(r, seed);
      rep.messages.push_back(e.what());
    }
  }
  return rep;
}

int cmd_validate(const fs::path& scenario, int probes, std::ostream& out, std::ostream& err) {
  ScenarioSpec spec;
  try {
    spec = load_scenario(scenario);
  } catch (const std::exception& e) {
    err << "ncap validate: " << e.what() << "\n";
    return 2;
  }
  const ValidationReport rep = validate_scenario(spec, probes);
  json offenders = json::array();
  for (const auto& [run, seed] : rep.offenders) offenders.push_back(json{{"run_index", run}, {"derived_seed", seed}});
  const json j{{"scenario", spec.name},
               {"probes", rep.probes},
               {"accepted", rep.accepted},
               {"draws", rep.draws},
               {"retries", rep.retries},
               {"rejection_rate", rep.rejection_rate()},
               {"passed", rep.passed()},
               {"offenders", offenders}};
  out << j.dump(2) << "\n";
  for (const auto& m : rep.messages) err << "ncap validate: " << m << "\n";
  return rep.passed() ? 0 : 1;
}

}  // namespace ncap

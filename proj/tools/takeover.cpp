// takeover: simulate, batch, estimate, report, synth-log.
//
// Exit codes: 0 ok, 1 invalid input or config, 2 numerical divergence or a
// failed fit, 3 file I/O.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "takeover/config.hpp"
#include "takeover/driver.hpp"
#include "takeover/metrics.hpp"
#include "takeover/report.hpp"
#include "takeover/sim.hpp"

namespace fs = std::filesystem;
using namespace takeover;

namespace {

enum Exit : int { kOk = 0, kValidation = 1, kDivergence = 2, kIo = 3 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 0;
  std::string strategy;
  bool verbatim_sigmoid = false;
};

fs::path output_dir(const Common& c) {
  std::string dir = c.out;
  if (dir.empty()) {
    const char* env = std::getenv("TAKEOVER_OUT");
    dir = (env && *env) ? env : "out";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir + "'");
  }
  return dir;
}

AppConfig load(const Common& c) {
  AppConfig cfg = c.config.empty() ? parse_config(nlohmann::json::object())
                                   : load_config(c.config);
  if (!c.strategy.empty()) {
    cfg.run.transition.kind = detail::parse_strategy(c.strategy, "--strategy");
    cfg.batch.strategies = {cfg.run.transition.kind};
  }
  if (c.verbatim_sigmoid) cfg.run.transition.verbatim_sigmoid = true;
  if (c.seed && cfg.batch.population) cfg.batch.population->seed = *c.seed;
  if (c.jobs > 0) cfg.jobs = c.jobs;
  cfg.run.validate();
  return cfg;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

int cmd_simulate(const Common& c) {
  const AppConfig cfg = load(c);
  const fs::path out = output_dir(c);
  const RunLog log = run_takeover(cfg.run);
  const fs::path csv_path = write_run(out, log);
  if (!log.ok()) {
    std::cerr << "error: run diverged at step " << log.failure->step << ": "
              << log.failure->message << " (partial log kept in "
              << csv_path.string() << ")\n";
    return kDivergence;
  }
  const TermNorms norms = cfg.norms ? *cfg.norms : batch_norms({log});
  print_warnings(norms.warnings);
  const ErrorReport rep = cumulative_error(log, norms);
  std::ostringstream rs;
  write_reports_csv(rs, {rep});
  write_text_file(out / (log.file_stem() + "_report.csv"), rs.str());
  if (log.envelope_exceedances > 0) {
    std::cerr << "warning: lateral acceleration above 4 m/s^2 at "
              << log.envelope_exceedances
              << " steps; the linear model is outside its validity range\n";
  }
  const auto& last = log.records.back();
  std::cout << log.file_stem() << ": eps_total " << rep.total << ", final y "
            << last.x(kLateral) << " m -> " << csv_path.string() << '\n';
  return kOk;
}

int cmd_batch(const Common& c) {
  const AppConfig cfg = load(c);
  const fs::path out = output_dir(c);
  const std::vector<RunConfig> runs = expand_batch(cfg);
  const std::vector<RunLog> logs = run_batch(runs, cfg.jobs);

  int failed = 0;
  std::map<std::string, std::vector<RunLog>> ok;
  for (const auto& log : logs) {
    write_run(out, log);
    if (!log.ok()) {
      ++failed;
      std::cerr << "run " << log.file_stem() << " failed at step "
                << log.failure->step << ": " << log.failure->message << '\n';
      continue;
    }
    ok[log.scenario].push_back(log);
  }

  std::vector<ErrorReport> all;
  for (const auto& [scenario, group] : ok) {
    const ScenarioSummary s = summarize(group, cfg.norms);
    print_warnings(s.norms.warnings);
    std::ostringstream table;
    write_comparison_csv(table, s.table);
    write_text_file(out / ("comparison_" + scenario + ".csv"), table.str());
    print_comparison(std::cout, s.table);
    std::cout << '\n';
    all.insert(all.end(), s.reports.begin(), s.reports.end());
  }
  std::ostringstream rs;
  write_reports_csv(rs, all);
  write_text_file(out / "reports.csv", rs.str());
  std::cout << logs.size() - static_cast<std::size_t>(failed) << " of "
            << logs.size() << " runs completed -> " << out.string() << '\n';
  return failed > 0 ? kDivergence : kOk;
}

struct EstimateArgs {
  std::string log;
  std::string label = "estimated";
  bool full = false;
};

int cmd_estimate(const Common& c, const EstimateArgs& a) {
  const AppConfig cfg = load(c);
  const fs::path out = output_dir(c);
  const DrivingLog log = read_driving_log(a.log);
  EstimateOptions opt;
  opt.label = a.label;
  opt.structure = a.full ? QStructure::kFull : QStructure::kDiagonal;
  const LinearModel model = build_system_matrices(cfg.run.vehicle);
  const EstimateResult res = estimate_q(log, model, cfg.run.driver.r, opt);
  const fs::path path = out / (a.label + ".json");
  write_profile(path.string(), res.profile);
  const Vec6 d = res.profile.q_max.diagonal();
  std::cout << "q_diag [";
  for (int i = 0; i < kStateDim; ++i) {
    std::cout << (i ? ", " : "") << kStateNames[static_cast<std::size_t>(i)]
              << " " << d(i);
  }
  std::cout << "]\nresidual rms " << res.residual_rms << " N m after "
            << res.iterations << " iterations -> " << path.string() << '\n';
  return kOk;
}

int cmd_report(const Common& c, const std::string& run_dir) {
  const AppConfig cfg = load(c);
  std::vector<std::string> warnings;
  std::vector<RunLog> logs = load_run_dir(run_dir, warnings);
  print_warnings(warnings);
  if (logs.empty()) {
    throw IoError("no run CSVs found in '" + run_dir + "'");
  }
  const fs::path out = c.out.empty() && !std::getenv("TAKEOVER_OUT")
                           ? fs::path(run_dir)
                           : output_dir(c);
  std::map<std::string, ScenarioSummary> summaries;
  for (auto& [scenario, group] : group_by_scenario(std::move(logs))) {
    ScenarioSummary s = summarize(group, cfg.norms);
    print_warnings(s.norms.warnings);
    print_comparison(std::cout, s.table);
    std::cout << '\n';
    std::ostringstream bars;
    write_comparison_csv(bars, s.table);
    write_text_file(out / ("fig_error_bars_" + scenario + ".csv"), bars.str());
    std::ostringstream traces;
    write_steering_traces(traces, group);
    write_text_file(out / ("fig_steering_" + scenario + ".csv"), traces.str());
    summaries.emplace(scenario, std::move(s));
  }
  std::ostringstream sum;
  write_summary_csv(sum, summaries);
  write_text_file(out / "summary.csv", sum.str());
  std::cout << "summary -> " << (out / "summary.csv").string() << '\n';
  return kOk;
}

struct SynthArgs {
  std::vector<double> q_diag = {0, 0, 1, 5, 0, 0};
  double sigma = 0.0;
  std::string scenario = "lane_change";
  std::string file = "driving_log.csv";
};

int cmd_synth(const Common& c, const SynthArgs& a) {
  const AppConfig cfg = load(c);
  const fs::path out = output_dir(c);
  if (a.q_diag.size() != 6) {
    throw ConfigError("--q-diag", "expects 6 comma-separated entries");
  }
  Mat6 q = Mat6::Zero();
  for (int i = 0; i < kStateDim; ++i) q(i, i) = a.q_diag[static_cast<std::size_t>(i)];
  const ScenarioKind kind = detail::parse_scenario_name(a.scenario, "--scenario");
  SynthOptions opt;
  opt.noise_sigma = a.sigma;
  opt.seed = c.seed.value_or(0);
  opt.r = cfg.run.driver.r;
  const DrivingLog log = synth_driver_log(
      q, scenario_for(cfg, kind), build_system_matrices(cfg.run.vehicle), opt);
  const fs::path path = out / a.file;
  write_driving_log(path.string(), log);
  std::cout << log.samples.size() << " samples -> " << path.string() << '\n';
  return kOk;
}

void add_common(CLI::App* sub, Common& c, bool with_strategy) {
  sub->add_option("--config", c.config, "JSON run configuration");
  sub->add_option("--out", c.out,
                  "output directory (default: $TAKEOVER_OUT, else ./out)");
  sub->add_option("--seed", c.seed, "seed for synthetic drivers and noise");
  sub->add_option("--jobs", c.jobs, "worker threads (default: all cores)");
  if (with_strategy) {
    sub->add_option("--strategy", c.strategy,
                    "transition strategy override (step, linear, cooperative, "
                    "sigmoid, exponential, adaptive)");
    sub->add_flag("--verbatim-sigmoid", c.verbatim_sigmoid,
                  "use the sigmoid exactly as printed in the transition table");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shared-control takeover simulator"};
  app.require_subcommand(1);
  Common common;
  EstimateArgs est;
  SynthArgs synth;
  std::string run_dir;

  auto* sim = app.add_subcommand("simulate", "run one takeover simulation");
  add_common(sim, common, true);
  auto* batch = app.add_subcommand("batch", "scenarios x drivers x strategies");
  add_common(batch, common, true);
  auto* estimate = app.add_subcommand("estimate", "fit a driver Q from a log");
  add_common(estimate, common, false);
  estimate->add_option("log", est.log, "driving log CSV")->required();
  estimate->add_option("--label", est.label, "profile label and file name");
  estimate->add_flag("--full", est.full, "fit a full symmetric Q");
  auto* report = app.add_subcommand("report", "summarize a run directory");
  add_common(report, common, false);
  report->add_option("dir", run_dir, "directory of run CSVs")->required();
  auto* synth_cmd =
      app.add_subcommand("synth-log", "write a synthetic LQ driver log");
  add_common(synth_cmd, common, false);
  synth_cmd->add_option("--q-diag", synth.q_diag, "true Q diagonal")
      ->delimiter(',')
      ->expected(6);
  synth_cmd->add_option("--sigma", synth.sigma, "torque noise [N m]");
  synth_cmd->add_option("--scenario", synth.scenario, "scenario kind");
  synth_cmd->add_option("--file", synth.file, "output file name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*batch) return cmd_batch(common);
    if (*estimate) return cmd_estimate(common, est);
    if (*report) return cmd_report(common, run_dir);
    if (*synth_cmd) return cmd_synth(common, synth);
  } catch (const UnidentifiableError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const EstimationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
    return kDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ContractViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
  return kOk;
}

#pragma once

// Run directories: per-run sidecar metadata, reloading a directory of run
// CSVs, and the plot-ready tables derived from it.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "takeover/csv.hpp"
#include "takeover/errors.hpp"
#include "takeover/metrics.hpp"
#include "takeover/scenario.hpp"
#include "takeover/sim.hpp"
#include "takeover/transition.hpp"

namespace takeover {

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::json run_meta_json(const RunLog& log) {
  nlohmann::ordered_json j;
  j["scenario"] = log.scenario;
  j["strategy"] = log.strategy;
  j["driver"] = log.driver;
  j["config_hash"] = hex64(log.config_hash);
  j["dt"] = log.dt;
  j["t_start"] = log.t_start;
  j["t_end"] = log.t_end;
  j["steps"] = log.records.size();
  j["envelope_exceedances"] = log.envelope_exceedances;
  if (log.failure) {
    j["failure"] = {{"message", log.failure->message},
                    {"step", log.failure->step}};
  } else {
    j["failure"] = nullptr;
  }
  return nlohmann::json::parse(j.dump());
}

inline void write_run_meta(const std::string& path, const RunLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << run_meta_json(log).dump(2) << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Writes `<stem>.csv` and `<stem>.meta.json` into `dir`.
inline std::filesystem::path write_run(const std::filesystem::path& dir,
                                       const RunLog& log) {
  const auto csv_path = dir / (log.file_stem() + ".csv");
  write_run_log(csv_path.string(), log);
  write_run_meta((dir / (log.file_stem() + ".meta.json")).string(), log);
  return csv_path;
}

struct RunName {
  std::string scenario;
  std::string strategy;
  std::string driver;
};

/// Splits `<scenario>_<strategy>_<driver>`; scenario and strategy names are
/// matched against the known sets since they may contain underscores.
inline std::optional<RunName> parse_run_stem(std::string_view stem) {
  for (ScenarioKind sk : {ScenarioKind::kDoubleLaneChange,
                          ScenarioKind::kLaneChange, ScenarioKind::kCustom}) {
    const std::string sname(to_string(sk));
    if (stem.size() <= sname.size() + 1 || stem.substr(0, sname.size()) != sname ||
        stem[sname.size()] != '_') {
      continue;
    }
    const std::string_view rest = stem.substr(sname.size() + 1);
    for (TransitionKind tk : kAllTransitions) {
      const std::string tname(to_string(tk));
      if (rest.size() > tname.size() + 1 && rest.substr(0, tname.size()) == tname &&
          rest[tname.size()] == '_') {
        return RunName{sname, tname, std::string(rest.substr(tname.size() + 1))};
      }
    }
  }
  return std::nullopt;
}

/// Files the CLI itself derives from runs; never treated as run logs.
inline bool is_derived_output(const std::string& name) {
  return name == "summary.csv" || name == "reports.csv" ||
         name.rfind("comparison_", 0) == 0 || name.rfind("fig_", 0) == 0;
}

/// Loads every run CSV in `dir` (sorted by file name). Unreadable or
/// foreign CSVs are skipped with a message in `warnings`; failed runs are
/// skipped too since their logs are partial.
inline std::vector<RunLog> load_run_dir(const std::filesystem::path& dir,
                                        std::vector<std::string>& warnings) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw IoError("'" + dir.string() + "' is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".csv" &&
        !is_derived_output(e.path().filename().string())) {
      files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<RunLog> logs;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    try {
      RunLog log = read_run_log(f.string());
      const fs::path meta = dir / (stem + ".meta.json");
      if (fs::exists(meta)) {
        std::ifstream in(meta);
        const auto j = nlohmann::json::parse(in);
        log.scenario = j.at("scenario").get<std::string>();
        log.strategy = j.at("strategy").get<std::string>();
        log.driver = j.at("driver").get<std::string>();
        log.t_start = j.value("t_start", 0.0);
        log.t_end = j.value("t_end", 0.0);
        if (!j.at("failure").is_null()) {
          log.failure = RunFailure{j["failure"].value("message", std::string()),
                                   j["failure"].value("step", -1L)};
        }
      } else if (auto name = parse_run_stem(stem)) {
        log.scenario = name->scenario;
        log.strategy = name->strategy;
        log.driver = name->driver;
      } else {
        warnings.push_back(f.filename().string() +
                           ": name is not <scenario>_<strategy>_<driver> and "
                           "no metadata file; skipped");
        continue;
      }
      if (log.records.empty()) {
        warnings.push_back(f.filename().string() + ": no rows; skipped");
        continue;
      }
      if (!log.ok()) {
        warnings.push_back(f.filename().string() + ": run failed (" +
                           log.failure->message + "); skipped");
        continue;
      }
      logs.push_back(std::move(log));
    } catch (const std::exception& e) {
      warnings.push_back(f.filename().string() + ": " + e.what() + "; skipped");
    }
  }
  return logs;
}

/// Groups logs by scenario name, keeping first-seen order inside a group.
inline std::map<std::string, std::vector<RunLog>> group_by_scenario(
    std::vector<RunLog> logs) {
  std::map<std::string, std::vector<RunLog>> out;
  for (auto& l : logs) out[l.scenario].push_back(std::move(l));
  return out;
}

struct ScenarioSummary {
  TermNorms norms;
  std::vector<ErrorReport> reports;
  ComparisonTable table;
};

/// Batch-normalized reports and the strategy comparison for one scenario.
/// Without a step run, percentages are taken against the first strategy.
inline ScenarioSummary summarize(const std::vector<RunLog>& logs,
                                 const std::optional<TermNorms>& fixed = {}) {
  ScenarioSummary s;
  s.norms = fixed ? *fixed : batch_norms(logs);
  for (const auto& l : logs) s.reports.push_back(cumulative_error(l, s.norms));
  bool has_step = false;
  for (const auto& r : s.reports) has_step |= r.strategy == "step";
  s.table = compare_strategies(
      s.reports, has_step ? std::string_view("step")
                          : std::string_view(s.reports.front().strategy));
  return s;
}

inline void write_summary_csv(
    std::ostream& out, const std::map<std::string, ScenarioSummary>& byscen) {
  out << "scenario,strategy,mean_total,std_total,pct_vs_step,runs\n";
  for (const auto& [scenario, s] : byscen) {
    for (const auto& r : s.table.rows) {
      out << scenario << ',' << r.strategy << ','
          << csv::format_double(r.mean_total) << ','
          << csv::format_double(r.std_total) << ','
          << csv::format_double(r.pct_vs_step) << ',' << r.runs << '\n';
    }
  }
}

/// Long-format steering traces: one row per logged step of every run.
inline void write_steering_traces(std::ostream& out,
                                  const std::vector<RunLog>& logs) {
  out << "strategy,driver,t,td,ta,alpha_d,t_start,t_end\n";
  for (const auto& l : logs) {
    for (const auto& r : l.records) {
      out << l.strategy << ',' << l.driver << ',' << csv::format_double(r.t)
          << ',' << csv::format_double(r.driver_torque) << ','
          << csv::format_double(r.adas_torque) << ','
          << csv::format_double(r.alpha_driver) << ','
          << csv::format_double(l.t_start) << ',' << csv::format_double(l.t_end)
          << '\n';
    }
  }
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace takeover

#pragma once

// Cumulative trajectory error
//   eps_total = sum_k (e_y^2 / n_y + e_psi^2 / n_psi + beta^2 / n_beta
//                      + delta^2 / n_delta)
// over the whole run, and cross-strategy comparison tables.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "takeover/csv.hpp"
#include "takeover/errors.hpp"
#include "takeover/sim.hpp"

namespace takeover {

enum ErrorTerm : int { kTermLateral = 0, kTermHeading, kTermSideSlip, kTermSteer };

inline constexpr int kErrorTerms = 4;
inline constexpr std::array<const char*, kErrorTerms> kErrorTermNames = {
    "ey", "epsi", "beta", "delta"};

struct TermNorms {
  std::array<double, kErrorTerms> values = {1.0, 1.0, 1.0, 1.0};
  std::vector<std::string> warnings;

  bool operator==(const TermNorms& o) const { return values == o.values; }
};

struct ErrorReport {
  std::string strategy;
  std::string scenario;
  std::string driver;
  std::array<double, kErrorTerms> raw{};
  std::array<double, kErrorTerms> normalized{};
  TermNorms norms;
  double total = 0.0;
  double steer_rate_sum = 0.0;  // sum of deltadot^2, informational only
};

inline std::array<double, kErrorTerms> raw_error_sums(const RunLog& log) {
  std::array<double, kErrorTerms> s{};
  for (const auto& r : log.records) {
    s[kTermLateral] += r.lateral_error * r.lateral_error;
    s[kTermHeading] += r.heading_error * r.heading_error;
    s[kTermSideSlip] += r.x(kSideSlip) * r.x(kSideSlip);
    s[kTermSteer] += r.x(kSteer) * r.x(kSteer);
  }
  return s;
}

inline ErrorReport cumulative_error(const RunLog& log, const TermNorms& norms) {
  if (log.records.empty()) {
    throw ContractViolation("cumulative_error: empty log");
  }
  for (int i = 0; i < kErrorTerms; ++i) {
    const double v = norms.values[static_cast<std::size_t>(i)];
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("metrics.norms.") + kErrorTermNames[i],
                        "normalization constant must be positive");
    }
  }
  ErrorReport rep;
  rep.strategy = log.strategy;
  rep.scenario = log.scenario;
  rep.driver = log.driver;
  rep.norms = norms;
  rep.raw = raw_error_sums(log);
  for (std::size_t i = 0; i < kErrorTerms; ++i) {
    rep.normalized[i] = rep.raw[i] / norms.values[i];
    rep.total += rep.normalized[i];
  }
  for (const auto& r : log.records) {
    rep.steer_rate_sum += r.x(kSteerRate) * r.x(kSteerRate);
  }
  return rep;
}

/// Per-term maxima over the batch, so every normalized term lies in [0, 1].
inline TermNorms batch_norms(const std::vector<RunLog>& logs) {
  if (logs.empty()) throw ContractViolation("batch_norms: empty batch");
  TermNorms n;
  n.values = {0.0, 0.0, 0.0, 0.0};
  for (const auto& log : logs) {
    const auto raw = raw_error_sums(log);
    for (std::size_t i = 0; i < kErrorTerms; ++i) {
      n.values[i] = std::max(n.values[i], raw[i]);
    }
  }
  for (std::size_t i = 0; i < kErrorTerms; ++i) {
    if (n.values[i] == 0.0) {
      n.values[i] = 1.0;
      n.warnings.push_back(std::string("error term '") + kErrorTermNames[i] +
                           "' is zero across the batch; using 1");
    }
  }
  return n;
}

struct ComparisonRow {
  std::string strategy;
  double mean_total = 0.0;
  double std_total = 0.0;  // sample standard deviation over drivers
  double pct_vs_step = 0.0;
  std::size_t runs = 0;
};

struct ComparisonTable {
  std::string scenario;
  std::vector<ComparisonRow> rows;  // sorted by descending mean_total

  const ComparisonRow* find(std::string_view strategy) const {
    for (const auto& r : rows) {
      if (r.strategy == strategy) return &r;
    }
    return nullptr;
  }
};

inline ComparisonTable compare_strategies(
    const std::vector<ErrorReport>& reports,
    std::string_view baseline = "step") {
  if (reports.empty()) throw ContractViolation("compare_strategies: no reports");
  for (const auto& r : reports) {
    if (!(r.norms == reports.front().norms)) {
      throw ContractViolation(
          "compare_strategies: reports use different normalization constants");
    }
  }
  // Welford accumulation per strategy, first-seen order.
  struct Acc {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const auto& r : reports) {
    auto [it, fresh] = acc.try_emplace(r.strategy);
    if (fresh) order.push_back(r.strategy);
    Acc& a = it->second;
    ++a.n;
    const double d = r.total - a.mean;
    a.mean += d / static_cast<double>(a.n);
    a.m2 += d * (r.total - a.mean);
  }
  const auto base = acc.find(std::string(baseline));
  if (base == acc.end()) {
    throw ContractViolation("compare_strategies: baseline strategy '" +
                            std::string(baseline) + "' missing");
  }
  const double base_mean = base->second.mean;

  ComparisonTable table;
  table.scenario = reports.front().scenario;
  for (const auto& name : order) {
    const Acc& a = acc.at(name);
    ComparisonRow row;
    row.strategy = name;
    row.runs = a.n;
    row.mean_total = a.mean;
    row.std_total = a.n > 1 ? std::sqrt(a.m2 / static_cast<double>(a.n - 1)) : 0.0;
    row.pct_vs_step =
        base_mean != 0.0 ? 100.0 * (a.mean - base_mean) / base_mean : 0.0;
    if (name == baseline) row.pct_vs_step = 0.0;
    table.rows.push_back(row);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ComparisonRow& x, const ComparisonRow& y) {
                     return x.mean_total > y.mean_total;
                   });
  return table;
}

inline void write_comparison_csv(std::ostream& out, const ComparisonTable& t) {
  out << "strategy,mean_total,std_total,pct_vs_step\n";
  for (const auto& r : t.rows) {
    out << r.strategy << ',' << csv::format_double(r.mean_total) << ','
        << csv::format_double(r.std_total) << ','
        << csv::format_double(r.pct_vs_step) << '\n';
  }
}

inline void write_comparison_csv(const std::string& path,
                                 const ComparisonTable& t) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_comparison_csv(out, t);
}

inline void print_comparison(std::ostream& out, const ComparisonTable& t) {
  char line[160];
  if (!t.scenario.empty()) out << "scenario: " << t.scenario << '\n';
  std::snprintf(line, sizeof(line), "%-12s %12s %12s %12s %5s\n", "strategy",
                "mean_total", "std_total", "pct_vs_step", "runs");
  out << line;
  for (const auto& r : t.rows) {
    std::snprintf(line, sizeof(line), "%-12s %12.4f %12.4f %+11.2f%% %5zu\n",
                  r.strategy.c_str(), r.mean_total, r.std_total, r.pct_vs_step,
                  r.runs);
    out << line;
  }
}

inline void write_reports_csv(std::ostream& out,
                              const std::vector<ErrorReport>& reports) {
  out << "scenario,strategy,driver,ey,epsi,beta,delta,ey_norm,epsi_norm,"
         "beta_norm,delta_norm,total,deltadot\n";
  for (const auto& r : reports) {
    out << r.scenario << ',' << r.strategy << ',' << r.driver;
    for (double v : r.raw) out << ',' << csv::format_double(v);
    for (double v : r.normalized) out << ',' << csv::format_double(v);
    out << ',' << csv::format_double(r.total) << ','
        << csv::format_double(r.steer_rate_sum) << '\n';
  }
}

}  // namespace takeover

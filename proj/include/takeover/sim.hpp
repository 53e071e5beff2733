#pragma once

// Phase-structured takeover simulation. At every step the authority share
// is set (ADAS only before t_S, transition law inside [t_S, t_E), driver
// only afterwards), the per-player Q matrices are blended, the coupled
// Riccati equations are solved over the preview horizon with those weights
// frozen, and the first-step feedback torques drive the plant.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "takeover/csv.hpp"
#include "takeover/driver.hpp"
#include "takeover/errors.hpp"
#include "takeover/game.hpp"
#include "takeover/scenario.hpp"
#include "takeover/transition.hpp"
#include "takeover/types.hpp"
#include "takeover/vehicle.hpp"

namespace takeover {

enum class TerminalPolicy {
  kCurrentWeights,  // S_i = Q_i(t), the blended running weight
  kMaxWeights,      // S_i = Q_i^max
  kZero,            // S_i = 0
};

inline constexpr std::string_view to_string(TerminalPolicy p) {
  switch (p) {
    case TerminalPolicy::kCurrentWeights: return "current";
    case TerminalPolicy::kMaxWeights: return "max";
    case TerminalPolicy::kZero: return "zero";
  }
  return "unknown";
}

struct AdasWeights {
  Mat6 q_max = diag6({0, 0, 0, 5, 0, 0});
  double r = 1.0;
};

struct StateBounds {
  bool enabled = true;
  double side_slip = 0.2;  // |beta| [rad]
  double lateral = 8.0;    // |y| [m]
};

struct RunConfig {
  VehicleParams vehicle;
  Scenario scenario;
  TransitionSpec transition;
  DriverProfile driver;
  AdasWeights adas;
  double horizon = 1.5;
  double dt = 0.01;
  TerminalPolicy terminal = TerminalPolicy::kCurrentWeights;
  Discretization discretization = Discretization::kForwardEuler;
  StateBounds bounds;
  bool reuse_solutions = true;  // skip re-solving when weights are unchanged

  double duration() const { return scenario.duration; }
  long steps() const { return std::lround(duration() / dt); }

  void validate() const {
    vehicle.validate();
    scenario.validate();
    transition.validate();
    driver.validate();
    GameWeights{adas.q_max, adas.r, Mat6::Zero()}.validate("adas");
    horizon_steps(horizon, dt);
    const double n = duration() / dt;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n)) {
      throw ConfigError("sim.dt", "duration must be an integer multiple of dt");
    }
    if (transition.t_end > duration() + kTimeSlack) {
      throw ConfigError("transition.t_end",
                        "t_end (" + std::to_string(transition.t_end) +
                            ") exceeds the run duration (" +
                            std::to_string(duration()) + ")");
    }
    if (std::abs(scenario.speed - vehicle.speed) > 1e-9) {
      throw ConfigError("scenario.speed",
                        "scenario speed differs from vehicle speed");
    }
  }
};

struct RunRecord {
  double t = 0.0;
  StateVector x = StateVector::Zero();
  StateVector x_ref = StateVector::Zero();
  double alpha_driver = 0.0;
  double alpha_adas = 1.0;
  double driver_torque = 0.0;
  double adas_torque = 0.0;
  double lateral_error = 0.0;
  double heading_error = 0.0;

  bool operator==(const RunRecord& o) const {
    return t == o.t && x == o.x && x_ref == o.x_ref &&
           alpha_driver == o.alpha_driver && alpha_adas == o.alpha_adas &&
           driver_torque == o.driver_torque && adas_torque == o.adas_torque &&
           lateral_error == o.lateral_error && heading_error == o.heading_error;
  }
};

struct RunFailure {
  std::string message;
  long step = -1;
};

struct RunLog {
  std::vector<RunRecord> records;
  std::string scenario;
  std::string strategy;
  std::string driver;
  std::uint64_t config_hash = 0;
  double dt = 0.01;
  double t_start = 0.0;
  double t_end = 0.0;
  long envelope_exceedances = 0;  // samples with |a_y| > 4 m/s^2
  std::optional<RunFailure> failure;

  bool ok() const { return !failure.has_value(); }

  std::string file_stem() const {
    return scenario + "_" + strategy + "_" + driver;
  }
};

// ---------------------------------------------------------------------------
// Config hash

namespace detail {

inline std::uint64_t fnv1a(std::string_view s,
                           std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline void append_matrix(std::string& out, const Mat6& m) {
  for (int i = 0; i < kStateDim; ++i) {
    for (int k = 0; k < kStateDim; ++k) {
      out += csv::format_double(m(i, k));
      out += ',';
    }
  }
}

}  // namespace detail

/// Canonical text form of everything that influences a run.
inline std::string canonical_string(const RunConfig& c) {
  std::string s;
  auto num = [&](double v) {
    s += csv::format_double(v);
    s += ';';
  };
  const VehicleParams& v = c.vehicle;
  for (double x : {v.mass, v.yaw_inertia, v.speed, v.front_axle, v.rear_axle,
                   v.front_cornering, v.rear_cornering, v.steering_ratio,
                   v.steering_inertia, v.steering_stiffness,
                   v.steering_damping}) {
    num(x);
  }
  const Scenario& sc = c.scenario;
  s += sc.name() + ';';
  for (double x : {sc.offset, sc.ramp_start, sc.ramp_end, sc.return_start,
                   sc.return_end, sc.duration, sc.speed}) {
    num(x);
  }
  for (const auto& r : sc.table) {
    num(r.t);
    num(r.y);
  }
  const TransitionSpec& tr = c.transition;
  s += std::string(to_string(tr.kind)) + ';';
  for (double x : {tr.t_start, tr.t_end, tr.steepness, tr.rate,
                   tr.lateral_gain, tr.heading_gain}) {
    num(x);
  }
  s += tr.verbatim_sigmoid ? "verbatim;" : "normalized;";
  s += c.driver.label + ';';
  detail::append_matrix(s, c.driver.q_max);
  num(c.driver.r);
  detail::append_matrix(s, c.adas.q_max);
  num(c.adas.r);
  num(c.horizon);
  num(c.dt);
  s += std::string(to_string(c.terminal)) + ';';
  s += c.discretization == Discretization::kExact ? "exact;" : "euler;";
  s += c.bounds.enabled ? "bounded;" : "unbounded;";
  num(c.bounds.side_slip);
  num(c.bounds.lateral);
  return s;
}

inline std::uint64_t config_hash(const RunConfig& c) {
  return detail::fnv1a(canonical_string(c));
}

// ---------------------------------------------------------------------------
// Simulation

namespace detail {

inline Mat6 terminal_weight(TerminalPolicy policy, const Mat6& current,
                            const Mat6& max) {
  switch (policy) {
    case TerminalPolicy::kCurrentWeights: return current;
    case TerminalPolicy::kMaxWeights: return max;
    case TerminalPolicy::kZero: return Mat6::Zero();
  }
  return current;
}

}  // namespace detail

inline RunLog run_takeover(const RunConfig& cfg) {
  cfg.validate();
  const LinearModel model = build_system_matrices(cfg.vehicle);
  const DiscreteModel plant = discretize(model, cfg.dt, cfg.discretization);
  const long n = cfg.steps();

  RunLog log;
  log.scenario = cfg.scenario.name();
  log.strategy = std::string(to_string(cfg.transition.kind));
  log.driver = cfg.driver.label;
  log.config_hash = config_hash(cfg);
  log.dt = cfg.dt;
  log.t_start = cfg.transition.t_start;
  log.t_end = cfg.transition.t_end;
  log.records.reserve(static_cast<std::size_t>(n) + 1);

  StateVector x = StateVector::Zero();
  std::optional<CoupledSolution> cached;
  double cached_share = -1.0;

  for (long k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    try {
      RunRecord rec;
      rec.t = t;
      rec.x = x;
      rec.x_ref = reference_state(cfg.scenario, std::min(t, cfg.duration()));
      const Vec6 err = x - rec.x_ref;
      rec.lateral_error = err(kLateral);
      rec.heading_error = err(kYaw);

      rec.alpha_driver =
          alpha(cfg.transition, t, {rec.lateral_error, rec.heading_error});
      rec.alpha_adas = 1.0 - rec.alpha_driver;

      if (!cached || !cfg.reuse_solutions ||
          rec.alpha_driver != cached_share) {
        const BlendedWeights q =
            blend_weights(rec.alpha_driver, cfg.driver.q_max, cfg.adas.q_max);
        const GameWeights wd{q.driver, cfg.driver.r,
                             detail::terminal_weight(cfg.terminal, q.driver,
                                                     cfg.driver.q_max)};
        const GameWeights wa{q.adas, cfg.adas.r,
                             detail::terminal_weight(cfg.terminal, q.adas,
                                                     cfg.adas.q_max)};
        cached = solve_coupled_riccati(model, wd, wa, cfg.horizon, cfg.dt);
        cached_share = rec.alpha_driver;
      }
      rec.driver_torque = feedback_torque(cached->driver, 0, err);
      rec.adas_torque = feedback_torque(cached->adas, 0, err);

      if (std::abs(lateral_acceleration(model, x)) >
          kLateralAccelerationEnvelope) {
        ++log.envelope_exceedances;
      }
      log.records.push_back(rec);

      if (cfg.bounds.enabled &&
          (std::abs(x(kSideSlip)) > cfg.bounds.side_slip ||
           std::abs(x(kLateral)) > cfg.bounds.lateral)) {
        throw DivergenceError("state bound exceeded (|beta| = " +
                                  std::to_string(std::abs(x(kSideSlip))) +
                                  ", |y| = " +
                                  std::to_string(std::abs(x(kLateral))) + ")",
                              k);
      }
      if (k < n) {
        x = step_dynamics(x, rec.driver_torque, rec.adas_torque, plant, k);
      }
    } catch (const DivergenceError& e) {
      log.failure = RunFailure{e.what(), e.step() >= 0 ? e.step() : k};
      break;
    }
  }
  return log;
}

/// Runs every config, preserving order. Failures stay inside the
/// corresponding log; invalid configs are reported the same way.
inline std::vector<RunLog> run_batch(const std::vector<RunConfig>& cfgs,
                                     unsigned jobs = 0) {
  if (cfgs.empty()) throw ContractViolation("run_batch: empty config list");
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(cfgs.size()));

  std::vector<RunLog> logs(cfgs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) {
      try {
        logs[i] = run_takeover(cfgs[i]);
      } catch (const std::exception& e) {
        RunLog failed;
        failed.scenario = cfgs[i].scenario.name();
        failed.strategy = std::string(to_string(cfgs[i].transition.kind));
        failed.driver = cfgs[i].driver.label;
        failed.failure = RunFailure{e.what(), -1};
        logs[i] = std::move(failed);
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  return logs;
}

// ---------------------------------------------------------------------------
// Cost of a logged run

/// Weights player `p` actually carried at every logged step.
inline WeightSchedule applied_weights(const RunLog& log, const Mat6& q_max,
                                      double r, Player p,
                                      TerminalPolicy terminal =
                                          TerminalPolicy::kZero) {
  WeightSchedule w;
  w.r = r;
  w.q.reserve(log.records.size());
  for (const auto& rec : log.records) {
    const double share =
        p == Player::kDriver ? rec.alpha_driver : rec.alpha_adas;
    w.q.push_back(share * q_max);
  }
  if (!w.q.empty()) {
    w.s = detail::terminal_weight(terminal, w.q.back(), q_max);
  }
  return w;
}

inline double cost_of_run(const RunLog& log, const WeightSchedule& w,
                          Player p) {
  std::vector<Vec6> errors;
  std::vector<double> torques;
  errors.reserve(log.records.size());
  torques.reserve(log.records.size());
  for (const auto& rec : log.records) {
    errors.push_back(rec.x - rec.x_ref);
    torques.push_back(p == Player::kDriver ? rec.driver_torque
                                           : rec.adas_torque);
  }
  return cost_of_run(errors, torques, w, log.dt);
}

// ---------------------------------------------------------------------------
// RunLog CSV

inline const std::vector<std::string>& run_log_header() {
  static const std::vector<std::string> h = {
      "t",       "beta",    "psidot", "psi", "y",  "delta", "deltadot", "yref",
      "psiref",  "alpha_d", "alpha_a", "td", "ta", "ey",    "epsi"};
  return h;
}

inline void write_run_log(std::ostream& out, const RunLog& log) {
  std::vector<std::vector<double>> rows;
  rows.reserve(log.records.size());
  for (const auto& r : log.records) {
    rows.push_back({r.t, r.x(0), r.x(1), r.x(2), r.x(3), r.x(4), r.x(5),
                    r.x_ref(kLateral), r.x_ref(kYaw), r.alpha_driver,
                    r.alpha_adas, r.driver_torque, r.adas_torque,
                    r.lateral_error, r.heading_error});
  }
  csv::write(out, run_log_header(), rows);
}

inline void write_run_log(const std::string& path, const RunLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_run_log(out, log);
  if (!out) throw IoError("write failed for '" + path + "'");
}

/// Rebuilds the records of a RunLog; metadata is left default.
inline RunLog run_log_from_table(const csv::Table& table,
                                 const std::string& source) {
  const auto& header = run_log_header();
  std::vector<std::size_t> idx;
  for (const auto& name : header) {
    idx.push_back(static_cast<std::size_t>(table.require(name, source)));
  }
  RunLog log;
  for (const auto& row : table.rows) {
    RunRecord r;
    r.t = row[idx[0]];
    for (int i = 0; i < kStateDim; ++i) {
      r.x(i) = row[idx[1 + static_cast<std::size_t>(i)]];
    }
    r.x_ref.setZero();
    r.x_ref(kLateral) = row[idx[7]];
    r.x_ref(kYaw) = row[idx[8]];
    r.alpha_driver = row[idx[9]];
    r.alpha_adas = row[idx[10]];
    r.driver_torque = row[idx[11]];
    r.adas_torque = row[idx[12]];
    r.lateral_error = row[idx[13]];
    r.heading_error = row[idx[14]];
    log.records.push_back(r);
  }
  if (log.records.size() >= 2) {
    log.dt = log.records[1].t - log.records[0].t;
  }
  return log;
}

inline RunLog read_run_log(const std::string& path) {
  return run_log_from_table(csv::read(path), path);
}

}  // namespace takeover

#pragma once

// Driver tracking preferences: the state-weight matrix Q_D^max, its
// estimation from logged (state, reference, torque) samples by inverse LQ
// regression, and a synthetic log generator that stands in for recorded
// human data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "takeover/care.hpp"
#include "takeover/csv.hpp"
#include "takeover/errors.hpp"
#include "takeover/scenario.hpp"
#include "takeover/types.hpp"
#include "takeover/vehicle.hpp"

namespace takeover {

struct DriverProfile {
  Mat6 q_max = Mat6::Zero();
  double r = 1.0;
  std::string label = "driver";

  void validate() const {
    Eigen::SelfAdjointEigenSolver<Mat6> es(q_max, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, q_max.cwiseAbs().maxCoeff());
    if (!q_max.allFinite() ||
        (q_max - q_max.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale ||
        es.eigenvalues().minCoeff() < -1e-9 * scale) {
      throw ConfigError("driver.q", "must be symmetric positive semidefinite");
    }
    if (!(r > 0.0 && std::isfinite(r))) {
      throw ConfigError("driver.r", "must be positive");
    }
  }
};

struct DrivingSample {
  double t = 0.0;
  StateVector x = StateVector::Zero();
  StateVector x_ref = StateVector::Zero();
  double u = 0.0;
};

/// Uniformly sampled record of a driver tracking a reference.
struct DrivingLog {
  double interval = 0.1;
  std::vector<DrivingSample> samples;

  static constexpr std::size_t kMinSamples = 10;

  void validate() const {
    if (samples.size() < kMinSamples) {
      throw IoError("driving log needs at least " +
                    std::to_string(kMinSamples) + " samples, has " +
                    std::to_string(samples.size()));
    }
    for (std::size_t i = 1; i < samples.size(); ++i) {
      const double dt = samples[i].t - samples[i - 1].t;
      if (std::abs(dt - interval) > 1e-6 * std::max(1.0, interval)) {
        throw IoError("driving log is not uniformly sampled at row " +
                      std::to_string(i + 1) + " (interval " +
                      std::to_string(dt) + " vs " + std::to_string(interval) +
                      ")");
      }
    }
  }
};

inline const std::vector<std::string>& driving_log_header() {
  static const std::vector<std::string> h = {
      "t", "beta", "psidot", "psi", "y", "delta", "deltadot", "yref", "psiref",
      "u"};
  return h;
}

inline void write_driving_log(const std::string& path, const DrivingLog& log) {
  std::vector<std::vector<double>> rows;
  rows.reserve(log.samples.size());
  for (const auto& s : log.samples) {
    rows.push_back({s.t, s.x(0), s.x(1), s.x(2), s.x(3), s.x(4), s.x(5),
                    s.x_ref(kLateral), s.x_ref(kYaw), s.u});
  }
  csv::write_file(path, driving_log_header(), rows);
}

inline DrivingLog driving_log_from_table(const csv::Table& table,
                                         const std::string& source) {
  std::vector<int> idx;
  for (const auto& name : driving_log_header()) {
    idx.push_back(table.require(name, source));
  }
  DrivingLog log;
  for (const auto& row : table.rows) {
    DrivingSample s;
    auto at = [&](std::size_t c) { return row[static_cast<std::size_t>(idx[c])]; };
    s.t = at(0);
    for (int i = 0; i < kStateDim; ++i) s.x(i) = at(1 + static_cast<std::size_t>(i));
    s.x_ref(kLateral) = at(7);
    s.x_ref(kYaw) = at(8);
    s.u = at(9);
    log.samples.push_back(s);
  }
  if (log.samples.size() >= 2) {
    log.interval = log.samples[1].t - log.samples[0].t;
  }
  log.validate();
  return log;
}

inline DrivingLog read_driving_log(const std::string& path) {
  return driving_log_from_table(csv::read(path), path);
}

// Profile persistence: {"label": ..., "r": ..., "q_diag": [6], "q": [36]}.
inline nlohmann::json profile_to_json(const DriverProfile& p) {
  nlohmann::json j;
  j["label"] = p.label;
  j["r"] = p.r;
  std::vector<double> diag(kStateDim), full;
  for (int i = 0; i < kStateDim; ++i) diag[static_cast<std::size_t>(i)] = p.q_max(i, i);
  for (int i = 0; i < kStateDim; ++i) {
    for (int k = 0; k < kStateDim; ++k) full.push_back(p.q_max(i, k));
  }
  j["q_diag"] = diag;
  if (!p.q_max.isDiagonal(0.0)) j["q"] = full;
  return j;
}

inline DriverProfile profile_from_json(const nlohmann::json& j,
                                       const std::string& where = "driver") {
  DriverProfile p;
  try {
    p.label = j.value("label", std::string("driver"));
    p.r = j.value("r", 1.0);
    if (j.contains("q")) {
      const auto v = j.at("q").get<std::vector<double>>();
      if (v.size() != 36) throw ConfigError(where + ".q", "expects 36 entries");
      for (int i = 0; i < kStateDim; ++i) {
        for (int k = 0; k < kStateDim; ++k) {
          p.q_max(i, k) = v[static_cast<std::size_t>(i * kStateDim + k)];
        }
      }
    } else if (j.contains("q_diag")) {
      const auto v = j.at("q_diag").get<std::vector<double>>();
      if (v.size() != 6) throw ConfigError(where + ".q_diag", "expects 6 entries");
      for (int i = 0; i < kStateDim; ++i) p.q_max(i, i) = v[static_cast<std::size_t>(i)];
    } else {
      throw ConfigError(where, "needs q_diag or q");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where, e.what());
  }
  p.validate();
  return p;
}

inline void write_profile(const std::string& path, const DriverProfile& p) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << profile_to_json(p).dump(2) << '\n';
}

inline DriverProfile read_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return profile_from_json(nlohmann::json::parse(in), path);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path, e.what());
  }
}

// ---------------------------------------------------------------------------
// Synthetic logs

struct SynthOptions {
  double noise_sigma = 0.0;  // torque noise [N m], applied to the plant
  double log_interval = 0.1;
  double sim_dt = 0.01;
  double r = 1.0;
  std::uint64_t seed = 0;
};

/// Single-player stationary LQR driver tracking the scenario reference.
inline DrivingLog synth_driver_log(const Mat6& q_true, const Scenario& scenario,
                                   const LinearModel& model,
                                   const SynthOptions& opt = {}) {
  if (!(opt.noise_sigma >= 0.0)) throw ParameterError("noise sigma must be >= 0");
  const long stride = std::lround(opt.log_interval / opt.sim_dt);
  if (stride < 1 ||
      std::abs(static_cast<double>(stride) * opt.sim_dt - opt.log_interval) >
          1e-9) {
    throw ParameterError("log interval must be a multiple of the sim step");
  }
  const auto lqr =
      solve_stationary_riccati(model.a, model.b_driver, q_true, opt.r);
  const DiscreteModel dm = discretize(model, opt.sim_dt);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  const long steps = std::lround(scenario.duration / opt.sim_dt);
  DrivingLog log;
  log.interval = opt.log_interval;
  StateVector x = StateVector::Zero();
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * opt.sim_dt;
    const StateVector ref = reference_state(scenario, std::min(t, scenario.duration));
    double u = -lqr.gain.dot(x - ref);
    if (opt.noise_sigma > 0.0) u += opt.noise_sigma * noise(rng);
    if (k % stride == 0) log.samples.push_back({t, x, ref, u});
    if (k == steps) break;
    x = step_dynamics(x, u, 0.0, dm, k);
    if (x.cwiseAbs().maxCoeff() > 1e6) {
      throw DivergenceError("synthetic driver closed loop diverged", k);
    }
  }
  return log;
}

// Random driver population: q_y log-uniform, q_psi uniform, all other
// entries zero. The default ranges describe drivers who weight lane position
// well above the ADAS (q_y = 5) and heading anywhere from not at all to
// strongly.
struct PopulationSpec {
  int count = 10;
  double lateral_min = 50.0;
  double lateral_max = 500.0;
  double heading_min = 0.0;
  double heading_max = 50.0;
  double r = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (count < 1) throw ConfigError("batch.population.count", "must be >= 1");
    if (!(lateral_min > 0.0 && lateral_max >= lateral_min)) {
      throw ConfigError("batch.population.q_y",
                        "range must satisfy 0 < min <= max");
    }
    if (!(heading_min >= 0.0 && heading_max >= heading_min)) {
      throw ConfigError("batch.population.q_psi",
                        "range must satisfy 0 <= min <= max");
    }
    if (!(r > 0.0)) throw ConfigError("batch.population.r", "must be positive");
  }
};

inline std::vector<DriverProfile> synth_population(const PopulationSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = std::log(spec.lateral_min);
  const double hi = std::log(spec.lateral_max);
  std::vector<DriverProfile> out;
  for (int i = 0; i < spec.count; ++i) {
    const double qy = std::exp(lo + unit(rng) * (hi - lo));
    const double qpsi =
        spec.heading_min + unit(rng) * (spec.heading_max - spec.heading_min);
    DriverProfile p;
    p.q_max = diag6({0, 0, qpsi, qy, 0, 0});
    p.r = spec.r;
    p.label = "d" + std::to_string(i);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Estimation

enum class QStructure { kDiagonal, kFull };

struct EstimateOptions {
  QStructure structure = QStructure::kDiagonal;
  double floor = 1e-8;          // lower bound on every diagonal entry
  double tolerance = 1e-8;      // relative residual change at convergence
  int max_iterations = 500;
  std::string label = "estimated";
};

struct EstimateResult {
  DriverProfile profile;
  double residual_rms = 0.0;  // RMS torque residual [N m]
  int iterations = 0;
};

namespace detail {

inline int parameter_count(QStructure s) {
  return s == QStructure::kDiagonal ? kStateDim
                                    : kStateDim * (kStateDim + 1) / 2;
}

// Diagonal: q_ii = theta_i^2 + floor. Full: Q = L L' + floor I with L lower
// triangular, theta listing L row by row.
inline Mat6 q_from_params(const Eigen::VectorXd& theta, QStructure s,
                          double floor) {
  if (s == QStructure::kDiagonal) {
    Mat6 q = Mat6::Zero();
    for (int i = 0; i < kStateDim; ++i) q(i, i) = theta(i) * theta(i) + floor;
    return q;
  }
  Mat6 l = Mat6::Zero();
  int idx = 0;
  for (int i = 0; i < kStateDim; ++i) {
    for (int k = 0; k <= i; ++k) l(i, k) = theta(idx++);
  }
  return l * l.transpose() + floor * Mat6::Identity();
}

inline Eigen::VectorXd initial_params(QStructure s) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(parameter_count(s));
  if (s == QStructure::kDiagonal) {
    theta.setOnes();
  } else {
    int idx = 0;
    for (int i = 0; i < kStateDim; ++i) {
      for (int k = 0; k <= i; ++k) theta(idx++) = (i == k) ? 1.0 : 0.0;
    }
  }
  return theta;
}

// Inverse LQ from a regressed gain. With K fixed, the stationary Riccati
// equation A'P + PA - K'RK + Q = 0 together with B'P = RK is linear in
// (P, Q); the minimum-norm solution gives a starting point near the answer.
inline Eigen::VectorXd params_from_gain(
    const LinearModel& model, double r,
    const Eigen::Matrix<double, Eigen::Dynamic, kStateDim>& errors,
    const Eigen::VectorXd& torques, QStructure s, double floor) {
  constexpr int n = kStateDim;
  constexpr int sym = n * (n + 1) / 2;
  const Vec6 kt = -errors.colPivHouseholderQr().solve(torques);
  const RowVec6 k = kt.transpose();
  const Mat6 krk = k.transpose() * r * k;
  const int nq = s == QStructure::kDiagonal ? n : sym;

  auto sym_basis = [](int idx) {
    Mat6 e = Mat6::Zero();
    int c = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j, ++c) {
        if (c == idx) {
          e(i, j) = 1.0;
          e(j, i) = 1.0;
          return e;
        }
      }
    }
    return e;
  };
  auto upper = [](const Mat6& m, Eigen::VectorXd& out, int off) {
    int c = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) out(off + c++) = m(i, j);
    }
  };

  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(sym + n, sym + nq);
  Eigen::VectorXd col(sym + n);
  for (int u = 0; u < sym; ++u) {
    const Mat6 e = sym_basis(u);
    upper(model.a.transpose() * e + e * model.a, col, 0);
    col.tail<n>() = (model.b_driver.transpose() * e).transpose();
    lhs.col(u) = col;
  }
  for (int u = 0; u < nq; ++u) {
    const Mat6 e = s == QStructure::kDiagonal
                       ? Mat6(Vec6::Unit(u).asDiagonal())
                       : sym_basis(u);
    col.setZero();
    upper(e, col, 0);
    lhs.col(sym + u) = col;
  }
  Eigen::VectorXd rhs(sym + n);
  upper(krk, rhs, 0);
  rhs.tail<n>() = r * kt;
  const Eigen::VectorXd sol = lhs.completeOrthogonalDecomposition().solve(rhs);

  Mat6 q = Mat6::Zero();
  if (s == QStructure::kDiagonal) {
    for (int i = 0; i < n; ++i) q(i, i) = sol(sym + i);
  } else {
    for (int u = 0; u < sym; ++u) q += sol(sym + u) * sym_basis(u);
  }
  // Keep every entry strictly positive so no parameter starts at a stationary
  // point of the squared parameterization.
  const double tiny = 1e-10 * std::max(1.0, q.diagonal().cwiseAbs().maxCoeff());
  Eigen::VectorXd theta(parameter_count(s));
  if (s == QStructure::kDiagonal) {
    for (int i = 0; i < n; ++i) {
      theta(i) = std::sqrt(std::max(q(i, i) - floor, tiny));
    }
    return theta;
  }
  Eigen::SelfAdjointEigenSolver<Mat6> eig(q);
  const Vec6 lam = eig.eigenvalues().cwiseMax(tiny);
  const Mat6 qp = eig.eigenvectors() * lam.asDiagonal() *
                  eig.eigenvectors().transpose();
  const Mat6 l = Eigen::LLT<Mat6>(qp).matrixL();
  int idx = 0;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c <= i; ++c) theta(idx++) = l(i, c);
  }
  return theta;
}

}  // namespace detail

/// Fits Q so that the stationary LQ feedback -R^-1 B_D' P(Q) x~ reproduces
/// the logged torques in the least-squares sense. Levenberg-Marquardt is run
/// from Q = I and from an inverse-LQ guess; the better fit wins.
inline EstimateResult estimate_q(const DrivingLog& log, const LinearModel& model,
                                 double r, const EstimateOptions& opt = {}) {
  log.validate();
  if (!(r > 0.0)) throw ParameterError("R must be positive");
  const auto n = static_cast<Eigen::Index>(log.samples.size());
  Eigen::Matrix<double, Eigen::Dynamic, kStateDim> errors(n, kStateDim);
  Eigen::VectorXd torques(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = log.samples[static_cast<std::size_t>(k)];
    errors.row(k) = (s.x - s.x_ref).transpose();
    torques(k) = s.u;
  }
  if (errors.cwiseAbs().maxCoeff() == 0.0) {
    throw UnidentifiableError(
        "log is unidentifiable: tracking error is zero at every sample");
  }

  auto residuals = [&](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    const Mat6 q = detail::q_from_params(theta, opt.structure, opt.floor);
    const auto lqr = solve_stationary_riccati(model.a, model.b_driver, q, r);
    return torques + errors * lqr.gain.transpose();
  };

  struct Fit {
    Eigen::VectorXd theta;
    double cost = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
  };

  struct Residuals {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>* eval;
    Eigen::Index n_params;
    Eigen::Index n_values;
    Eigen::Index inputs() const { return n_params; }
    Eigen::Index values() const { return n_values; }
    int operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
      try {
        out = (*eval)(theta);
      } catch (const ParameterError&) {
        out.setConstant(n_values, 1e6);  // pushes the step back
      }
      return 0;
    }
  };
  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eval = residuals;

  auto levenberg_marquardt = [&](Eigen::VectorXd theta) {
    Fit fit;
    Residuals f{&eval, theta.size(), n};
    Eigen::NumericalDiff<Residuals, Eigen::Central> diff(f);
    Eigen::LevenbergMarquardt<decltype(diff)> lm(diff);
    lm.parameters.ftol = opt.tolerance;
    lm.parameters.xtol = opt.tolerance;
    lm.parameters.maxfev = opt.max_iterations * (theta.size() + 1);
    const auto status = lm.minimize(theta);
    fit.theta = theta;
    fit.cost = eval(theta).squaredNorm();
    fit.iterations = static_cast<int>(lm.iter);
    fit.converged = status != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation &&
                    status != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                    std::isfinite(fit.cost);
    return fit;
  };

  Fit best = levenberg_marquardt(detail::initial_params(opt.structure));
  const Fit guided = levenberg_marquardt(detail::params_from_gain(
      model, r, errors, torques, opt.structure, opt.floor));
  const int total_iterations = best.iterations + guided.iterations;
  if (guided.converged && (!best.converged || guided.cost < best.cost)) {
    best = guided;
  }

  const double rms = std::sqrt(best.cost / static_cast<double>(n));
  if (!best.converged) {
    throw EstimationError("estimation did not converge after " +
                              std::to_string(opt.max_iterations) +
                              " iterations (RMS torque residual " +
                              std::to_string(rms) + " N m)",
                          rms);
  }
  EstimateResult out;
  out.profile.q_max =
      detail::q_from_params(best.theta, opt.structure, opt.floor);
  out.profile.r = r;
  out.profile.label = opt.label;
  out.residual_rms = rms;
  out.iterations = total_iterations;
  return out;
}

}  // namespace takeover

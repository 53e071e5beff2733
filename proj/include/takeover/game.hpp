#pragma once

// Two-player closed-loop linear-quadratic differential game on the tracking
// error x~ = x - x_ref.
//
// Each player i minimizes
//   J_i = 1/2 x~(T)' S_i x~(T) + 1/2 int (x~' Q_i x~ + u_i R_i u_i) dt
// and plays u_i = -R_i^-1 B_i' P_i x~, where the pair (P_D, P_A) solves the
// coupled Riccati differential equations
//   -P_i' = P_i (A - F_j P_j) + (A - F_j P_j)' P_i - P_i F_i P_i + Q_i,
//   F_i = B_i R_i^-1 B_i',  P_i(T) = S_i,
// integrated backwards with a first-order Euler step.

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "takeover/errors.hpp"
#include "takeover/types.hpp"
#include "takeover/vehicle.hpp"

namespace takeover {

inline constexpr double kRiccatiBlowUp = 1e12;

struct GameWeights {
  Mat6 q = Mat6::Zero();
  double r = 1.0;
  Mat6 s = Mat6::Zero();

  void validate(std::string_view who = "weights") const;
};

namespace detail {

inline bool is_symmetric(const Mat6& m, double tol = 1e-9) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

inline bool is_psd(const Mat6& m, double tol = 1e-9) {
  if (!m.allFinite() || !is_symmetric(m)) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Mat6> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

}  // namespace detail

inline void GameWeights::validate(std::string_view who) const {
  const std::string prefix(who);
  if (!detail::is_psd(q)) {
    throw ParameterError(prefix + ".q must be symmetric positive semidefinite");
  }
  if (!detail::is_psd(s)) {
    throw ParameterError(prefix + ".s must be symmetric positive semidefinite");
  }
  if (!(std::isfinite(r) && r > 0.0)) {
    throw ParameterError(prefix + ".r must be positive, got " +
                         std::to_string(r));
  }
}

/// Backward-solved value matrices and feedback gains for one player.
struct RiccatiSolution {
  std::vector<Mat6> p;          // p[k], k = 0..n, p[n] = S
  std::vector<RowVec6> gains;   // K^(k) = R^-1 B' P^(k)
  Mat6 f = Mat6::Zero();        // B R^-1 B'
  Vec6 input = Vec6::Zero();
  double r = 1.0;
  double dt = 0.0;

  int steps() const { return static_cast<int>(p.size()) - 1; }
};

struct CoupledSolution {
  RiccatiSolution driver;
  RiccatiSolution adas;

  const RiccatiSolution& of(Player p) const {
    return p == Player::kDriver ? driver : adas;
  }
};

/// Number of Euler steps for a horizon; throws ParameterError unless
/// horizon / dt is a positive integer.
inline int horizon_steps(double horizon, double dt) {
  if (!(std::isfinite(dt) && dt > 0.0)) {
    throw ParameterError("time step must be positive");
  }
  if (!(std::isfinite(horizon) && horizon > 0.0)) {
    throw ParameterError("horizon must be positive");
  }
  const double ratio = horizon / dt;
  const double n = std::round(ratio);
  if (n < 1.0 || std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw ParameterError("horizon " + std::to_string(horizon) +
                         " is not an integer multiple of dt " +
                         std::to_string(dt));
  }
  return static_cast<int>(n);
}

inline CoupledSolution solve_coupled_riccati(const LinearModel& model,
                                             const GameWeights& driver,
                                             const GameWeights& adas,
                                             double horizon, double dt) {
  driver.validate("driver");
  adas.validate("adas");
  const int n = horizon_steps(horizon, dt);

  const Mat6& a = model.a;
  const Vec6& bd = model.b_driver;
  const Vec6& ba = model.b_adas;

  CoupledSolution sol;
  auto init = [&](RiccatiSolution& s, const Vec6& b, const GameWeights& w) {
    s.p.resize(static_cast<std::size_t>(n) + 1);
    s.gains.resize(static_cast<std::size_t>(n) + 1);
    s.input = b;
    s.r = w.r;
    s.f = b * b.transpose() / w.r;
    s.dt = dt;
    s.p[static_cast<std::size_t>(n)] = w.s;
  };
  init(sol.driver, bd, driver);
  init(sol.adas, ba, adas);

  for (int k = n; k >= 1; --k) {
    const Mat6& pd = sol.driver.p[static_cast<std::size_t>(k)];
    const Mat6& pa = sol.adas.p[static_cast<std::size_t>(k)];
    // F_i P_i = B_i (P_i B_i)' / R_i since P_i is symmetric.
    const Vec6 pd_b = pd * bd;
    const Vec6 pa_b = pa * ba;
    const Mat6 fd_pd = bd * pd_b.transpose() / driver.r;
    const Mat6 fa_pa = ba * pa_b.transpose() / adas.r;

    const Mat6 closed_d = a - fa_pa;  // seen by the driver
    const Mat6 closed_a = a - fd_pd;  // seen by the ADAS

    Mat6 next_d = pd + dt * (pd * closed_d + closed_d.transpose() * pd -
                             pd_b * pd_b.transpose() / driver.r + driver.q);
    Mat6 next_a = pa + dt * (pa * closed_a + closed_a.transpose() * pa -
                             pa_b * pa_b.transpose() / adas.r + adas.q);
    next_d = 0.5 * (next_d + next_d.transpose()).eval();
    next_a = 0.5 * (next_a + next_a.transpose()).eval();

    auto blown = [](const Mat6& m) {
      return !m.allFinite() || m.cwiseAbs().maxCoeff() > kRiccatiBlowUp;
    };
    if (blown(next_d) || blown(next_a)) {
      throw DivergenceError(
          "coupled Riccati recursion diverged at step k=" +
              std::to_string(k - 1) +
              " (horizon too long or weights infeasible)",
          k - 1);
    }
    sol.driver.p[static_cast<std::size_t>(k) - 1] = next_d;
    sol.adas.p[static_cast<std::size_t>(k) - 1] = next_a;
  }

  for (RiccatiSolution* s : {&sol.driver, &sol.adas}) {
    for (std::size_t k = 0; k < s->p.size(); ++k) {
      s->gains[k] = (s->input.transpose() * s->p[k]) / s->r;
    }
  }
  return sol;
}

/// u = -R^-1 B' P^(k) x~.
inline double feedback_torque(const RiccatiSolution& sol, int k,
                              const Vec6& tracking_error) {
  if (k < 0 || k > sol.steps()) {
    throw ContractViolation("feedback_torque: step " + std::to_string(k) +
                            " outside [0, " + std::to_string(sol.steps()) +
                            "]");
  }
  return -sol.gains[static_cast<std::size_t>(k)].dot(tracking_error);
}

/// Per-step state weights actually applied to one player, plus R and S.
struct WeightSchedule {
  std::vector<Mat6> q;
  double r = 1.0;
  Mat6 s = Mat6::Zero();
};

/// Discrete cost
///   J = sum_{k<N} 1/2 (x~_k' Q_k x~_k + u_k R u_k) dt + 1/2 x~_N' S x~_N
/// over N + 1 samples. `q` and `torques` carry one entry per sample; the
/// last torque and last Q are not used.
inline double cost_of_run(std::span<const Vec6> errors,
                          std::span<const double> torques,
                          const WeightSchedule& w, double dt) {
  if (errors.empty()) throw ContractViolation("cost_of_run: empty run");
  if (torques.size() != errors.size() || w.q.size() != errors.size()) {
    throw ContractViolation(
        "cost_of_run: run has " + std::to_string(errors.size()) +
        " samples but " + std::to_string(torques.size()) + " torques and " +
        std::to_string(w.q.size()) + " weight entries");
  }
  double running = 0.0;
  const std::size_t last = errors.size() - 1;
  for (std::size_t k = 0; k < last; ++k) {
    const Vec6& e = errors[k];
    running += 0.5 * (e.dot(w.q[k] * e) + torques[k] * w.r * torques[k]) * dt;
  }
  return running + 0.5 * errors[last].dot(w.s * errors[last]);
}

}  // namespace takeover

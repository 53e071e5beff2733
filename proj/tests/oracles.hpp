#pragma once

// Reference computations written independently of the library solvers.

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "takeover/game.hpp"
#include "takeover/vehicle.hpp"

namespace oracle {

using takeover::Mat6;
using takeover::Vec6;

// Fixed point of the single-player Euler Riccati map
//   P <- P + dt (A'P + PA - P B R^-1 B' P + Q)
// iterated from P = 0 until the update stalls.
inline Mat6 lqr_fixed_point(const Mat6& a, const Vec6& b, const Mat6& q,
                            double r, double dt, int max_iter = 2000000) {
  const Eigen::Matrix<double, 6, 6> f = b * b.transpose() * (1.0 / r);
  Eigen::Matrix<double, 6, 6> p = Eigen::Matrix<double, 6, 6>::Zero();
  for (int it = 0; it < max_iter; ++it) {
    Eigen::Matrix<double, 6, 6> next =
        p + dt * (a.transpose() * p + p * a - p * f * p + q);
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change < 1e-14 * (1.0 + p.cwiseAbs().maxCoeff())) break;
  }
  return 0.5 * (p + p.transpose());
}

struct PlayedGame {
  std::vector<Vec6> errors;          // N + 1 samples
  std::vector<double> driver;        // N + 1 torques (last unused)
  std::vector<double> adas;
};

// Closed-loop play of the feedback Nash strategies over the whole horizon of
// `sol`, with one torque sample of one player shifted by `eps`.
inline PlayedGame play(const takeover::CoupledSolution& sol,
                       const takeover::DiscreteModel& dm, const Vec6& x0,
                       int perturbed_player = -1, int perturbed_step = -1,
                       double eps = 0.0) {
  const int n = sol.driver.steps();
  PlayedGame g;
  Vec6 x = x0;
  for (int k = 0; k <= n; ++k) {
    double ud = -(sol.driver.gains[static_cast<std::size_t>(k)] * x)(0);
    double ua = -(sol.adas.gains[static_cast<std::size_t>(k)] * x)(0);
    if (k == perturbed_step) {
      (perturbed_player == 0 ? ud : ua) += eps;
    }
    g.errors.push_back(x);
    g.driver.push_back(ud);
    g.adas.push_back(ua);
    if (k < n) x = dm.a * x + dm.b_driver * ud + dm.b_adas * ua;
  }
  return g;
}

// Two-pass sample standard deviation.
inline double sample_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace oracle

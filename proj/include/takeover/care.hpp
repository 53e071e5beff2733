#pragma once

// Stationary single-input Riccati solution
//   A'P + PA - P B R^-1 B' P + Q = 0
// via the matrix sign function of the Hamiltonian, followed by Newton
// (Kleinman) refinement. This is the fixed point of the backward Euler
// recursion used by the game solver with the other player absent.

#include <cmath>
#include <string>

#include "takeover/errors.hpp"
#include "takeover/types.hpp"

namespace takeover {

struct StationaryRiccati {
  Mat6 p = Mat6::Zero();
  RowVec6 gain = RowVec6::Zero();  // R^-1 B' P
  double residual = 0.0;           // max |A'P + PA - PFP + Q|
};

namespace detail {

inline Mat6 care_residual(const Mat6& a, const Mat6& f, const Mat6& q,
                          const Mat6& p) {
  return a.transpose() * p + p * a - p * f * p + q;
}

// Solves Acl' X + X Acl + C = 0 by vectorization.
inline Mat6 solve_lyapunov(const Mat6& acl, const Mat6& c) {
  constexpr int n = kStateDim;
  Eigen::Matrix<double, n * n, n * n> kron =
      Eigen::Matrix<double, n * n, n * n>::Zero();
  const Mat6 at = acl.transpose();
  const Mat6 eye = Mat6::Identity();
  // vec(A'X + XA) = (I (x) A' + A' (x) I) vec(X), column-major vec.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      kron.block<n, n>(i * n, j * n) += eye(i, j) * at;
      kron.block<n, n>(i * n, j * n) += at(i, j) * eye;
    }
  }
  Eigen::Matrix<double, n * n, 1> rhs =
      -Eigen::Map<const Eigen::Matrix<double, n * n, 1>>(c.data());
  Eigen::Matrix<double, n * n, 1> sol = kron.partialPivLu().solve(rhs);
  Mat6 x = Eigen::Map<Mat6>(sol.data());
  return 0.5 * (x + x.transpose());
}

}  // namespace detail

/// Minimal PSD solution by integrating the Riccati differential equation
/// backwards from P = 0 with step dt until stationary. Slow but valid when
/// the Hamiltonian has imaginary-axis eigenvalues (e.g. Q = 0).
inline StationaryRiccati integrate_stationary_riccati(const Mat6& a,
                                                      const Vec6& b,
                                                      const Mat6& q, double r,
                                                      double dt = 0.01,
                                                      int max_steps = 1000000) {
  if (!(r > 0.0)) throw ParameterError("R must be positive");
  Mat6 p = Mat6::Zero();
  for (int it = 0; it < max_steps; ++it) {
    const Vec6 pb = p * b;
    Mat6 next = p + dt * (p * a + a.transpose() * p -
                          pb * pb.transpose() / r + q);
    next = 0.5 * (next + next.transpose()).eval();
    if (!next.allFinite()) {
      throw ParameterError("stationary Riccati: integration diverged");
    }
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change <= 1e-14 * std::max(1.0, p.cwiseAbs().maxCoeff())) break;
  }
  StationaryRiccati out;
  out.p = p;
  out.gain = b.transpose() * p / r;
  out.residual =
      detail::care_residual(a, b * b.transpose() / r, q, p).cwiseAbs().maxCoeff();
  return out;
}

inline StationaryRiccati solve_stationary_riccati(const Mat6& a,
                                                  const Vec6& b,
                                                  const Mat6& q, double r) {
  if (!(r > 0.0)) throw ParameterError("R must be positive");
  if (q.isZero(0.0)) return StationaryRiccati{};
  constexpr int n = kStateDim;
  using Mat12 = Eigen::Matrix<double, 2 * n, 2 * n>;
  const Mat6 f = b * b.transpose() / r;

  Mat12 z;
  z << a, -f, -q, -a.transpose();

  for (int it = 0; it < 200; ++it) {
    Eigen::PartialPivLU<Mat12> lu(z);
    const double det = std::abs(lu.determinant());
    if (!(det > 0.0) || !std::isfinite(det)) {
      // Imaginary-axis eigenvalues: weights do not detect every marginal mode.
      return integrate_stationary_riccati(a, b, q, r);
    }
    const double c = std::pow(det, 1.0 / (2 * n));
    const Mat12 zi = lu.inverse();
    const Mat12 next = 0.5 * (z / c + c * zi);
    const double change = (next - z).cwiseAbs().sum();
    const double size = next.cwiseAbs().sum();
    z = next;
    if (change <= 1e-13 * size) break;
  }

  // W [I; P] = -[I; P]  =>  [W12; W22 + I] P = -[W11 + I; W21]
  Eigen::Matrix<double, 2 * n, n> lhs;
  lhs << z.topRightCorner<n, n>(),
      z.bottomRightCorner<n, n>() + Mat6::Identity();
  Eigen::Matrix<double, 2 * n, n> rhs;
  rhs << -(z.topLeftCorner<n, n>() + Mat6::Identity()),
      -z.bottomLeftCorner<n, n>();
  Mat6 p = lhs.colPivHouseholderQr().solve(rhs);
  p = 0.5 * (p + p.transpose()).eval();

  // Newton refinement while it improves the residual.
  double res = detail::care_residual(a, f, q, p).cwiseAbs().maxCoeff();
  for (int it = 0; it < 8 && res > 0.0; ++it) {
    const RowVec6 k = b.transpose() * p / r;
    const Mat6 acl = a - b * k;
    const Mat6 cand =
        detail::solve_lyapunov(acl, q + k.transpose() * r * k);
    const double cand_res =
        detail::care_residual(a, f, q, cand).cwiseAbs().maxCoeff();
    if (!(cand_res < res) || !cand.allFinite()) break;
    p = cand;
    res = cand_res;
  }

  if (!p.allFinite()) {
    throw ParameterError("stationary Riccati: solution is not finite");
  }
  StationaryRiccati out;
  out.p = p;
  out.gain = b.transpose() * p / r;
  out.residual = res;
  return out;
}

}  // namespace takeover

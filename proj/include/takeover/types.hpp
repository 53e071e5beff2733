#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include <Eigen/Dense>

namespace takeover {

inline constexpr int kStateDim = 6;

using Mat6 = Eigen::Matrix<double, kStateDim, kStateDim>;
using Vec6 = Eigen::Matrix<double, kStateDim, 1>;
using RowVec6 = Eigen::Matrix<double, 1, kStateDim>;

// [beta, yaw rate, yaw, lateral offset, steering-wheel angle, steering-wheel rate]
using StateVector = Vec6;

enum StateIndex : int {
  kSideSlip = 0,
  kYawRate = 1,
  kYaw = 2,
  kLateral = 3,
  kSteer = 4,
  kSteerRate = 5,
};

inline constexpr std::array<std::string_view, kStateDim> kStateNames = {
    "beta", "psidot", "psi", "y", "delta", "deltadot"};

enum class Player { kDriver, kAdas };

inline constexpr std::string_view to_string(Player p) {
  return p == Player::kDriver ? "driver" : "adas";
}

inline Mat6 diag6(const std::array<double, kStateDim>& d) {
  Mat6 m = Mat6::Zero();
  for (int i = 0; i < kStateDim; ++i) m(i, i) = d[static_cast<std::size_t>(i)];
  return m;
}

}  // namespace takeover

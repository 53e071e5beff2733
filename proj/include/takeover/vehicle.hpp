#pragma once

// Extended single-track vehicle model with steering-train dynamics.
//
//   x' = A x + b_driver T_D + b_adas T_A
//
// with x = [beta, yaw rate, yaw, y, steering-wheel angle, steering-wheel rate].
// Speed is constant over a run and stored in m/s.

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "takeover/errors.hpp"
#include "takeover/types.hpp"

namespace takeover {

inline constexpr double kmh_to_ms(double kmh) { return kmh / 3.6; }
inline constexpr double ms_to_kmh(double ms) { return ms * 3.6; }

/// Physical constants of the vehicle and steering train (SI units).
struct VehicleParams {
  double mass = 1600.0;                 // M [kg]
  double yaw_inertia = 1800.0;          // J_z [kg m^2]
  double speed = kmh_to_ms(120.0);      // v [m/s]
  double front_axle = 0.9;              // l_f [m]
  double rear_axle = 1.7;               // l_r [m]
  double front_cornering = 45e3;        // C_f [N/rad]
  double rear_cornering = 75e3;         // C_r [N/rad]
  double steering_ratio = 16.0;         // i_s [-]
  double steering_inertia = 0.04;       // J_s [N m s^2/rad]
  double steering_stiffness = 1.1;      // C_s [N m/rad]
  double steering_damping = 0.3;        // D_s [N m s/rad]

  /// Throws ParameterError naming the first non-positive or non-finite field.
  void validate() const {
    auto check = [](double value, const char* name) {
      if (!(std::isfinite(value) && value > 0.0)) {
        throw ParameterError(std::string("vehicle.") + name +
                             " must be positive and finite, got " +
                             std::to_string(value));
      }
    };
    check(mass, "mass");
    check(yaw_inertia, "yaw_inertia");
    check(speed, "speed");
    check(front_axle, "lf");
    check(rear_axle, "lr");
    check(front_cornering, "cf");
    check(rear_cornering, "cr");
    check(steering_ratio, "steering_ratio");
    check(steering_inertia, "steering_inertia");
    check(steering_stiffness, "steering_stiffness");
    check(steering_damping, "steering_damping");
  }

  /// Road-wheel angle corresponding to a steering-wheel angle. Display only.
  double road_wheel_angle(double steering_wheel_angle) const {
    return steering_wheel_angle / steering_ratio;
  }
};

struct LinearModel {
  Mat6 a = Mat6::Zero();
  Vec6 b_driver = Vec6::Zero();
  Vec6 b_adas = Vec6::Zero();
  double speed = 0.0;

  const Vec6& input(Player p) const {
    return p == Player::kDriver ? b_driver : b_adas;
  }
};

enum class Discretization {
  kForwardEuler,  // A_d = I + A dt, B_d = B dt
  kExact,         // zero-order hold through the matrix exponential
};

struct DiscreteModel {
  Mat6 a = Mat6::Identity();
  Vec6 b_driver = Vec6::Zero();
  Vec6 b_adas = Vec6::Zero();
  double dt = 0.0;
};

inline LinearModel build_system_matrices(const VehicleParams& p) {
  p.validate();
  const double m = p.mass;
  const double jz = p.yaw_inertia;
  const double v = p.speed;
  const double lf = p.front_axle;
  const double lr = p.rear_axle;
  const double cf = p.front_cornering;
  const double cr = p.rear_cornering;
  const double is = p.steering_ratio;
  const double js = p.steering_inertia;

  LinearModel model;
  model.speed = v;
  Mat6& a = model.a;
  a.setZero();

  a(0, 0) = (-cf - cr) / (m * v);
  a(0, 1) = (cr * lr - m * v * v - cf * lf) / (m * v * v);
  a(0, 4) = cf / (m * v * is);

  a(1, 0) = (cr * lr - cf * lf) / jz;
  a(1, 1) = (-cr * lr * lr - cf * lf * lf) / (jz * v);
  a(1, 4) = cf * lf / (jz * is);

  a(2, 1) = 1.0;

  a(3, 0) = v;
  a(3, 2) = v;

  a(4, 5) = 1.0;

  a(5, 4) = -p.steering_stiffness / js;
  a(5, 5) = -p.steering_damping / js;

  model.b_driver.setZero();
  model.b_driver(kSteerRate) = 1.0 / js;
  model.b_adas = model.b_driver;
  return model;
}

inline DiscreteModel discretize(const LinearModel& model, double dt,
                                Discretization method =
                                    Discretization::kForwardEuler) {
  if (!(std::isfinite(dt) && dt > 0.0)) {
    throw ParameterError("time step must be positive, got " +
                         std::to_string(dt));
  }
  DiscreteModel d;
  d.dt = dt;
  if (method == Discretization::kForwardEuler) {
    d.a = Mat6::Identity() + model.a * dt;
    d.b_driver = model.b_driver * dt;
    d.b_adas = model.b_adas * dt;
    return d;
  }
  // exp([[A, B_D, B_A], [0, 0, 0], [0, 0, 0]] dt)
  Eigen::Matrix<double, 8, 8> aug = Eigen::Matrix<double, 8, 8>::Zero();
  aug.topLeftCorner<6, 6>() = model.a * dt;
  aug.block<6, 1>(0, 6) = model.b_driver * dt;
  aug.block<6, 1>(0, 7) = model.b_adas * dt;
  const Eigen::Matrix<double, 8, 8> phi = aug.exp();
  d.a = phi.topLeftCorner<6, 6>();
  d.b_driver = phi.block<6, 1>(0, 6);
  d.b_adas = phi.block<6, 1>(0, 7);
  return d;
}

inline StateVector step_dynamics(const StateVector& x, double driver_torque,
                                 double adas_torque, const DiscreteModel& dm,
                                 long step = -1) {
  // Inputs summed first: with B_D = B_A, swapping the torques is then exact.
  const StateVector input =
      dm.b_driver * driver_torque + dm.b_adas * adas_torque;
  StateVector next = dm.a * x + input;
  for (int i = 0; i < kStateDim; ++i) {
    if (!std::isfinite(next(i))) {
      throw DivergenceError(
          "state component '" + std::string(kStateNames[i]) +
              "' became non-finite",
          step);
    }
  }
  return next;
}

/// a_y = v (beta' + yaw rate). The linear model is valid up to about 4 m/s^2.
inline double lateral_acceleration(const LinearModel& model,
                                   const StateVector& x) {
  const double beta_dot = model.a.row(kSideSlip).dot(x);
  return model.speed * (beta_dot + x(kYawRate));
}

inline constexpr double kLateralAccelerationEnvelope = 4.0;

}  // namespace takeover

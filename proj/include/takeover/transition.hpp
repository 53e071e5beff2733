#pragma once

// Control-authority transition laws. alpha is the driver's share of the
// state-tracking weight; the ADAS holds 1 - alpha.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "takeover/errors.hpp"
#include "takeover/types.hpp"

namespace takeover {

enum class TransitionKind {
  kStep,
  kLinear,
  kCooperative,
  kSigmoid,
  kExponential,
  kAdaptive,
};

inline constexpr std::array<TransitionKind, 6> kAllTransitions = {
    TransitionKind::kStep,    TransitionKind::kLinear,
    TransitionKind::kCooperative, TransitionKind::kSigmoid,
    TransitionKind::kExponential, TransitionKind::kAdaptive};

inline constexpr std::string_view to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::kStep: return "step";
    case TransitionKind::kLinear: return "linear";
    case TransitionKind::kCooperative: return "cooperative";
    case TransitionKind::kSigmoid: return "sigmoid";
    case TransitionKind::kExponential: return "exponential";
    case TransitionKind::kAdaptive: return "adaptive";
  }
  return "unknown";
}

inline std::optional<TransitionKind> parse_transition_kind(
    std::string_view name) {
  for (TransitionKind k : kAllTransitions) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

struct TransitionSpec {
  TransitionKind kind = TransitionKind::kCooperative;
  double t_start = 3.0;
  double t_end = 8.0;
  double steepness = 10.0;        // sigmoid k
  double rate = 4.0;              // exponential lambda, > 1
  double lateral_gain = 0.5;      // adaptive k1 [1/m]
  double heading_gain = 1.0;      // adaptive k2 [1/rad]
  bool verbatim_sigmoid = false;  // use the un-normalized sigmoid form

  /// Throws ConfigError with a `transition.*` field path. A window with
  /// t_start == t_end is accepted and degenerates to an instant handover.
  void validate() const {
    if (!std::isfinite(t_start) || !std::isfinite(t_end)) {
      throw ConfigError("transition.t_start", "window bounds must be finite");
    }
    if (t_start > t_end) {
      throw ConfigError("transition.t_start",
                        "t_start (" + std::to_string(t_start) +
                            ") must not exceed t_end (" +
                            std::to_string(t_end) + ")");
    }
    if (kind == TransitionKind::kExponential && !(rate > 1.0)) {
      throw ConfigError("transition.lambda",
                        "exponential transition requires lambda > 1, got " +
                            std::to_string(rate));
    }
    if (kind == TransitionKind::kSigmoid && !(std::isfinite(steepness))) {
      throw ConfigError("transition.k", "sigmoid steepness must be finite");
    }
    if (kind == TransitionKind::kAdaptive &&
        !(lateral_gain >= 0.0 && heading_gain >= 0.0 &&
          std::isfinite(lateral_gain) && std::isfinite(heading_gain))) {
      throw ConfigError("transition.k1",
                        "adaptive gains k1, k2 must be finite and >= 0");
    }
  }
};

struct ErrorSignals {
  double lateral = 0.0;  // cross-track error [m]
  double heading = 0.0;  // heading error [rad]
};

namespace detail {

inline double in_window_alpha(const TransitionSpec& spec, double t,
                              const ErrorSignals& err) {
  const double span = spec.t_end - spec.t_start;
  const double tau = (t - spec.t_start) / span;
  switch (spec.kind) {
    case TransitionKind::kStep:
      return 1.0;
    case TransitionKind::kLinear:
      return tau;
    case TransitionKind::kCooperative:
      return 0.5;
    case TransitionKind::kSigmoid:
      if (spec.verbatim_sigmoid) {
        const double mid = (spec.t_end + spec.t_start) / (2.0 * span);
        return 1.0 - 1.0 / (1.0 + std::exp(-spec.steepness * (t - mid)));
      }
      return 1.0 / (1.0 + std::exp(-spec.steepness * (tau - 0.5)));
    case TransitionKind::kExponential:
      return 1.0 - std::exp(-spec.rate * tau);
    case TransitionKind::kAdaptive: {
      const double deviation = std::abs(spec.lateral_gain * err.lateral +
                                        spec.heading_gain * err.heading);
      return 1.0 - std::min(0.5 + deviation, 1.0);
    }
  }
  return 0.0;
}

}  // namespace detail

/// Driver authority share in [0, 1]. Zero before t_start, one from t_end on;
/// the transition law only applies inside [t_start, t_end).
inline double alpha(const TransitionSpec& spec, double t,
                    const ErrorSignals& err = {}) {
  if (t < spec.t_start) return 0.0;
  if (t >= spec.t_end) return 1.0;
  const double a = detail::in_window_alpha(spec, t, err);
  if (std::isnan(a)) return 0.0;
  return std::clamp(a, 0.0, 1.0);
}

struct BlendedWeights {
  Mat6 driver;
  Mat6 adas;
};

/// Q_D = alpha Q_D^max, Q_A = (1 - alpha) Q_A^max.
inline BlendedWeights blend_weights(double driver_share, const Mat6& driver_max,
                                    const Mat6& adas_max) {
  if (!(driver_share >= 0.0 && driver_share <= 1.0)) {
    throw ContractViolation("blend_weights: alpha " +
                            std::to_string(driver_share) +
                            " outside [0, 1]");
  }
  return {driver_share * driver_max, (1.0 - driver_share) * adas_max};
}

}  // namespace takeover

#pragma once

// Time-domain reference trajectories for the lane-change (ISO 17361) and
// double-lane-change (ISO 3888-1) manoeuvres. Only y_ref and the
// small-angle path heading psi_ref = y_ref' / v are non-zero.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "takeover/csv.hpp"
#include "takeover/errors.hpp"
#include "takeover/types.hpp"
#include "takeover/vehicle.hpp"

namespace takeover {

enum class ScenarioKind { kLaneChange, kDoubleLaneChange, kCustom };

inline constexpr std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kLaneChange: return "lane_change";
    case ScenarioKind::kDoubleLaneChange: return "double_lane_change";
    case ScenarioKind::kCustom: return "custom";
  }
  return "unknown";
}

inline std::optional<ScenarioKind> parse_scenario_kind(std::string_view s) {
  for (auto k : {ScenarioKind::kLaneChange, ScenarioKind::kDoubleLaneChange,
                 ScenarioKind::kCustom}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct ReferenceSample {
  double t = 0.0;
  double y = 0.0;
};

struct Scenario {
  ScenarioKind kind = ScenarioKind::kLaneChange;
  double offset = 3.75;       // lateral target [m]
  double ramp_start = 3.0;    // outbound ramp [s]
  double ramp_end = 5.0;
  double return_start = 0.0;  // return ramp, double lane change only [s]
  double return_end = 0.0;
  double duration = 10.0;
  double speed = kmh_to_ms(120.0);
  double transition_start = 3.0;  // default takeover window [s]
  double transition_end = 8.0;
  double time_to_collision = 7.0;
  std::vector<ReferenceSample> table;  // custom: piecewise-linear samples

  std::string name() const { return std::string(to_string(kind)); }

  void validate() const;
};

inline void Scenario::validate() const {
  auto fail = [](const char* field, const std::string& msg) {
    throw ConfigError(std::string("scenario.") + field, msg);
  };
  if (!(duration > 0.0 && std::isfinite(duration))) {
    fail("duration", "must be positive");
  }
  if (!(speed > 0.0 && std::isfinite(speed))) fail("speed", "must be positive");
  if (kind == ScenarioKind::kCustom && !table.empty()) {
    if (table.size() < 2) fail("table", "needs at least two samples");
    for (std::size_t i = 1; i < table.size(); ++i) {
      if (!(table[i].t > table[i - 1].t)) {
        fail("table", "sample times must be strictly increasing (row " +
                          std::to_string(i + 1) + ")");
      }
    }
    for (const auto& s : table) {
      if (!std::isfinite(s.t) || !std::isfinite(s.y)) {
        fail("table", "non-finite sample");
      }
    }
    return;
  }
  if (!(offset > 0.0 && std::isfinite(offset))) fail("offset", "must be positive");
  if (!(ramp_start >= 0.0)) {
    fail("ramp_start", "must be >= 0, got " + std::to_string(ramp_start));
  }
  if (!(ramp_end > ramp_start)) {
    fail("ramp_end", "ramp_end (" + std::to_string(ramp_end) +
                         ") must be after ramp_start (" +
                         std::to_string(ramp_start) + ")");
  }
  if (ramp_end > duration) {
    fail("ramp_end", "ramp_end must lie within the run duration");
  }
  if (kind == ScenarioKind::kDoubleLaneChange) {
    if (!(return_start >= ramp_end)) {
      fail("return_start", "return_start (" + std::to_string(return_start) +
                               ") must not precede ramp_end (" +
                               std::to_string(ramp_end) + ")");
    }
    if (!(return_end > return_start)) {
      fail("return_end", "return_end (" + std::to_string(return_end) +
                             ") must be after return_start (" +
                             std::to_string(return_start) + ")");
    }
    if (return_end > duration) {
      fail("return_end", "return_end must lie within the run duration");
    }
  }
}

struct ScenarioOverrides {
  std::optional<double> offset;
  std::optional<double> ramp_start;
  std::optional<double> ramp_end;
  std::optional<double> return_start;
  std::optional<double> return_end;
  std::optional<double> duration;
  std::optional<double> speed;  // m/s
  std::optional<double> transition_start;
  std::optional<double> transition_end;
  std::vector<ReferenceSample> table;
};

/// Defaults: 10 s run at 120 km/h, takeover window [3, 8] s, 3.75 m lane
/// offset. The lane change ramps over [3, 5] s, which completes before the
/// 7 s time-to-collision; the double lane change ramps out over [2, 3.5] s
/// and back over [6, 7.5] s.
inline Scenario build_scenario(ScenarioKind kind,
                               const ScenarioOverrides& o = {}) {
  Scenario s;
  s.kind = kind;
  if (kind == ScenarioKind::kDoubleLaneChange) {
    s.ramp_start = 2.0;
    s.ramp_end = 3.5;
    s.return_start = 6.0;
    s.return_end = 7.5;
  }
  if (o.offset) s.offset = *o.offset;
  if (o.ramp_start) s.ramp_start = *o.ramp_start;
  if (o.ramp_end) s.ramp_end = *o.ramp_end;
  if (o.return_start) s.return_start = *o.return_start;
  if (o.return_end) s.return_end = *o.return_end;
  if (o.duration) s.duration = *o.duration;
  if (o.speed) s.speed = *o.speed;
  if (o.transition_start) s.transition_start = *o.transition_start;
  if (o.transition_end) s.transition_end = *o.transition_end;
  s.table = o.table;
  s.validate();
  return s;
}

/// Loads a `t,y_ref` table for a custom scenario.
inline std::vector<ReferenceSample> load_reference_table(
    const std::string& path) {
  const csv::Table t = csv::read(path);
  const int ti = t.require("t", path);
  int yi = t.find("y_ref");
  if (yi < 0) yi = t.require("yref", path);
  std::vector<ReferenceSample> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    out.push_back({r[static_cast<std::size_t>(ti)],
                   r[static_cast<std::size_t>(yi)]});
  }
  return out;
}

namespace detail {

struct RampValue {
  double y;
  double slope;
};

// Right-continuous slope: the ramp rate applies on [start, end).
inline RampValue ramp(double t, double start, double end, double from,
                      double to) {
  if (t < start) return {from, 0.0};
  if (t >= end) return {to, 0.0};
  const double rate = (to - from) / (end - start);
  return {from + rate * (t - start), rate};
}

inline RampValue table_value(const std::vector<ReferenceSample>& table,
                             double t) {
  if (t <= table.front().t) return {table.front().y, 0.0};
  if (t >= table.back().t) return {table.back().y, 0.0};
  const auto it = std::upper_bound(
      table.begin(), table.end(), t,
      [](double v, const ReferenceSample& s) { return v < s.t; });
  const ReferenceSample& hi = *it;
  const ReferenceSample& lo = *(it - 1);
  const double rate = (hi.y - lo.y) / (hi.t - lo.t);
  return {lo.y + rate * (t - lo.t), rate};
}

}  // namespace detail

inline constexpr double kTimeSlack = 1e-9;

inline StateVector reference_state(const Scenario& s, double t) {
  if (!(t >= -kTimeSlack && t <= s.duration + kTimeSlack)) {
    throw ContractViolation("reference_state: t = " + std::to_string(t) +
                            " outside [0, " + std::to_string(s.duration) +
                            "]");
  }
  detail::RampValue v{0.0, 0.0};
  if (s.kind == ScenarioKind::kCustom && !s.table.empty()) {
    v = detail::table_value(s.table, t);
  } else if (s.kind == ScenarioKind::kDoubleLaneChange && t >= s.return_start) {
    v = detail::ramp(t, s.return_start, s.return_end, s.offset, 0.0);
  } else {
    v = detail::ramp(t, s.ramp_start, s.ramp_end, 0.0, s.offset);
  }
  StateVector ref = StateVector::Zero();
  ref(kLateral) = v.y;
  ref(kYaw) = v.slope / s.speed;
  return ref;
}

}  // namespace takeover

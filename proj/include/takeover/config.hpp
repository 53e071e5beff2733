#pragma once

// JSON run configuration. Sections: vehicle, scenario, transition, driver,
// adas, sim, batch, metrics. Speeds are km/h, times s, angles rad. Every
// error carries the dotted path of the offending field; unknown keys are
// rejected so typos do not silently fall back to defaults.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "takeover/driver.hpp"
#include "takeover/errors.hpp"
#include "takeover/metrics.hpp"
#include "takeover/scenario.hpp"
#include "takeover/sim.hpp"
#include "takeover/transition.hpp"
#include "takeover/vehicle.hpp"

namespace takeover {

struct BatchSpec {
  std::vector<ScenarioKind> scenarios;      // empty: the run scenario only
  std::vector<TransitionKind> strategies;   // empty: all six
  std::vector<DriverProfile> drivers;       // explicit profiles
  std::optional<PopulationSpec> population; // synthetic drivers
};

struct AppConfig {
  RunConfig run;
  ScenarioOverrides scenario_overrides;
  BatchSpec batch;
  std::optional<TermNorms> norms;  // fixed normalization constants
  unsigned jobs = 0;               // 0: available parallelism
};

namespace detail {

using nlohmann::json;

// Walks one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
    }
  }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "has the wrong type (" +
                                        std::string(j_.at(key).type_name()) +
                                        ")");
    }
  }

  template <typename T>
  std::optional<T> opt(const std::string& key) {
    if (!j_.contains(key)) return std::nullopt;
    T v{};
    get(key, v);
    return v;
  }

  double number(const std::string& key, double fallback) {
    get(key, fallback);
    return fallback;
  }

  std::optional<Section> child(const std::string& key) {
    if (!j_.contains(key)) return std::nullopt;
    used_.insert(key);
    return Section(j_.at(key), field(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError(field(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

inline Mat6 matrix_from(Section& s, const std::string& diag_key,
                        const std::string& full_key, const Mat6& fallback) {
  if (s.has(full_key)) {
    std::vector<double> v;
    s.get(full_key, v);
    if (v.size() != 36) {
      throw ConfigError(s.field(full_key), "expects 36 row-major entries");
    }
    Mat6 m;
    for (int i = 0; i < kStateDim; ++i) {
      for (int k = 0; k < kStateDim; ++k) {
        m(i, k) = v[static_cast<std::size_t>(i * kStateDim + k)];
      }
    }
    return m;
  }
  if (s.has(diag_key)) {
    std::vector<double> v;
    s.get(diag_key, v);
    if (v.size() != 6) throw ConfigError(s.field(diag_key), "expects 6 entries");
    Mat6 m = Mat6::Zero();
    for (int i = 0; i < kStateDim; ++i) m(i, i) = v[static_cast<std::size_t>(i)];
    return m;
  }
  return fallback;
}

inline VehicleParams parse_vehicle(Section s) {
  VehicleParams p;
  p.mass = s.number("mass", p.mass);
  p.yaw_inertia = s.number("yaw_inertia", p.yaw_inertia);
  p.speed = kmh_to_ms(s.number("speed", ms_to_kmh(p.speed)));
  p.front_axle = s.number("lf", p.front_axle);
  p.rear_axle = s.number("lr", p.rear_axle);
  p.front_cornering = s.number("cf", p.front_cornering);
  p.rear_cornering = s.number("cr", p.rear_cornering);
  p.steering_ratio = s.number("steering_ratio", p.steering_ratio);
  p.steering_inertia = s.number("steering_inertia", p.steering_inertia);
  p.steering_stiffness = s.number("steering_stiffness", p.steering_stiffness);
  p.steering_damping = s.number("steering_damping", p.steering_damping);
  s.finish();
  try {
    p.validate();
  } catch (const ParameterError& e) {
    // message reads "vehicle.<field> must be ..."
    const std::string msg = e.what();
    const auto space = msg.find(' ');
    throw ConfigError(msg.substr(0, space), msg.substr(space + 1));
  }
  return p;
}

inline DriverProfile parse_driver(Section s, const std::filesystem::path& base) {
  DriverProfile p;
  if (s.has("profile")) {
    std::string file;
    s.get("profile", file);
    std::filesystem::path path(file);
    if (path.is_relative()) path = base / path;
    p = read_profile(path.string());
  }
  s.get("label", p.label);
  s.get("r", p.r);
  p.q_max = matrix_from(s, "q_diag", "q", p.q_max);
  s.finish();
  try {
    p.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(s.field(e.field().substr(e.field().find('.') + 1)),
                      e.message());
  }
  if (p.label.empty()) throw ConfigError(s.field("label"), "must not be empty");
  return p;
}

inline TransitionKind parse_strategy(const std::string& name,
                                     const std::string& field) {
  const auto k = parse_transition_kind(name);
  if (!k) {
    throw ConfigError(field, "unknown strategy '" + name +
                                 "' (step, linear, cooperative, sigmoid, "
                                 "exponential, adaptive)");
  }
  return *k;
}

inline ScenarioKind parse_scenario_name(const std::string& name,
                                        const std::string& field) {
  const auto k = parse_scenario_kind(name);
  if (!k) {
    throw ConfigError(field, "unknown scenario '" + name +
                                 "' (lane_change, double_lane_change, custom)");
  }
  return *k;
}

}  // namespace detail

/// Scenario of the given kind with the configured overrides. Ramp overrides
/// only apply to the kind named in the scenario section.
inline Scenario scenario_for(const AppConfig& cfg, ScenarioKind kind) {
  if (kind == cfg.run.scenario.kind) return cfg.run.scenario;
  ScenarioOverrides o;
  o.duration = cfg.scenario_overrides.duration;
  o.offset = cfg.scenario_overrides.offset;
  o.speed = cfg.run.vehicle.speed;
  o.transition_start = cfg.scenario_overrides.transition_start;
  o.transition_end = cfg.scenario_overrides.transition_end;
  return build_scenario(kind, o);
}

inline AppConfig parse_config(const nlohmann::json& root,
                              const std::filesystem::path& base = ".") {
  using detail::Section;
  AppConfig cfg;
  Section top(root, "");

  if (auto s = top.child("vehicle")) cfg.run.vehicle = detail::parse_vehicle(*s);

  // scenario
  ScenarioKind kind = ScenarioKind::kLaneChange;
  ScenarioOverrides& o = cfg.scenario_overrides;
  o.speed = cfg.run.vehicle.speed;
  if (auto s = top.child("scenario")) {
    std::string name = "lane_change";
    s->get("kind", name);
    kind = detail::parse_scenario_name(name, s->field("kind"));
    o.offset = s->opt<double>("offset");
    o.ramp_start = s->opt<double>("ramp_start");
    o.ramp_end = s->opt<double>("ramp_end");
    o.return_start = s->opt<double>("return_start");
    o.return_end = s->opt<double>("return_end");
    o.duration = s->opt<double>("duration");
    if (s->has("table")) {
      std::string file;
      s->get("table", file);
      std::filesystem::path path(file);
      if (path.is_relative()) path = base / path;
      o.table = load_reference_table(path.string());
    }
    s->finish();
    if (kind == ScenarioKind::kCustom && o.table.empty()) {
      throw ConfigError(s->field("table"),
                        "custom scenarios need a t,y_ref table");
    }
  }
  cfg.run.scenario = build_scenario(kind, o);

  // transition
  TransitionSpec& tr = cfg.run.transition;
  tr.t_start = cfg.run.scenario.transition_start;
  tr.t_end = cfg.run.scenario.transition_end;
  if (auto s = top.child("transition")) {
    std::string name(to_string(tr.kind));
    s->get("strategy", name);
    tr.kind = detail::parse_strategy(name, s->field("strategy"));
    tr.t_start = s->number("t_start", tr.t_start);
    tr.t_end = s->number("t_end", tr.t_end);
    tr.steepness = s->number("k", tr.steepness);
    tr.rate = s->number("lambda", tr.rate);
    tr.lateral_gain = s->number("k1", tr.lateral_gain);
    tr.heading_gain = s->number("k2", tr.heading_gain);
    s->get("verbatim_sigmoid", tr.verbatim_sigmoid);
    s->finish();
  }
  o.transition_start = tr.t_start;
  o.transition_end = tr.t_end;
  cfg.run.scenario.transition_start = tr.t_start;
  cfg.run.scenario.transition_end = tr.t_end;

  if (auto s = top.child("driver")) {
    cfg.run.driver = detail::parse_driver(*s, base);
  } else {
    cfg.run.driver.q_max = diag6({0, 0, 1, 5, 0, 0});
  }

  if (auto s = top.child("adas")) {
    s->get("r", cfg.run.adas.r);
    cfg.run.adas.q_max =
        detail::matrix_from(*s, "q_diag", "q", cfg.run.adas.q_max);
    s->finish();
  }

  if (auto s = top.child("sim")) {
    cfg.run.horizon = s->number("horizon", cfg.run.horizon);
    cfg.run.dt = s->number("dt", cfg.run.dt);
    std::string terminal(to_string(cfg.run.terminal));
    s->get("terminal", terminal);
    if (terminal == "current") {
      cfg.run.terminal = TerminalPolicy::kCurrentWeights;
    } else if (terminal == "max") {
      cfg.run.terminal = TerminalPolicy::kMaxWeights;
    } else if (terminal == "zero") {
      cfg.run.terminal = TerminalPolicy::kZero;
    } else {
      throw ConfigError(s->field("terminal"),
                        "expects current, max or zero, got '" + terminal + "'");
    }
    std::string disc = "euler";
    s->get("discretization", disc);
    if (disc == "euler") {
      cfg.run.discretization = Discretization::kForwardEuler;
    } else if (disc == "exact") {
      cfg.run.discretization = Discretization::kExact;
    } else {
      throw ConfigError(s->field("discretization"),
                        "expects euler or exact, got '" + disc + "'");
    }
    s->get("state_bounds", cfg.run.bounds.enabled);
    s->get("reuse_solutions", cfg.run.reuse_solutions);
    int jobs = 0;
    s->get("jobs", jobs);
    if (jobs < 0) throw ConfigError(s->field("jobs"), "must be >= 0");
    cfg.jobs = static_cast<unsigned>(jobs);
    s->finish();
  }

  if (auto s = top.child("batch")) {
    if (s->has("scenarios")) {
      std::vector<std::string> names;
      s->get("scenarios", names);
      for (const auto& n : names) {
        cfg.batch.scenarios.push_back(
            detail::parse_scenario_name(n, s->field("scenarios")));
      }
    }
    if (s->has("strategies")) {
      std::vector<std::string> names;
      s->get("strategies", names);
      for (const auto& n : names) {
        cfg.batch.strategies.push_back(
            detail::parse_strategy(n, s->field("strategies")));
      }
    }
    if (s->has("drivers")) {
      const auto& arr = s->raw("drivers");
      if (!arr.is_array()) {
        throw ConfigError(s->field("drivers"), "must be a list");
      }
      for (std::size_t i = 0; i < arr.size(); ++i) {
        cfg.batch.drivers.push_back(detail::parse_driver(
            Section(arr[i], s->field("drivers") + "[" + std::to_string(i) + "]"),
            base));
      }
    }
    if (auto p = s->child("population")) {
      PopulationSpec pop;
      p->get("count", pop.count);
      if (p->has("q_y")) {
        std::vector<double> v;
        p->get("q_y", v);
        if (v.size() != 2) throw ConfigError(p->field("q_y"), "expects [min, max]");
        pop.lateral_min = v[0];
        pop.lateral_max = v[1];
      }
      if (p->has("q_psi")) {
        std::vector<double> v;
        p->get("q_psi", v);
        if (v.size() != 2) {
          throw ConfigError(p->field("q_psi"), "expects [min, max]");
        }
        pop.heading_min = v[0];
        pop.heading_max = v[1];
      }
      p->get("r", pop.r);
      p->get("seed", pop.seed);
      p->finish();
      pop.validate();
      cfg.batch.population = pop;
    }
    s->finish();
  }

  if (auto s = top.child("metrics")) {
    if (s->has("norms")) {
      std::vector<double> v;
      s->get("norms", v);
      if (v.size() != kErrorTerms) {
        throw ConfigError(s->field("norms"),
                          "expects 4 entries (ey, epsi, beta, delta)");
      }
      TermNorms n;
      for (std::size_t i = 0; i < kErrorTerms; ++i) {
        if (!(v[i] > 0.0)) {
          throw ConfigError(s->field("norms"), std::string("entry '") +
                                                   kErrorTermNames[i] +
                                                   "' must be positive");
        }
        n.values[i] = v[i];
      }
      cfg.norms = n;
    }
    s->finish();
  }
  top.finish();

  cfg.run.validate();
  return cfg;
}

inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path, e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

/// Drivers a batch runs over: explicit profiles, then the synthetic
/// population; the single run driver when neither is given.
inline std::vector<DriverProfile> batch_drivers(const AppConfig& cfg) {
  std::vector<DriverProfile> out = cfg.batch.drivers;
  if (cfg.batch.population) {
    for (auto& d : synth_population(*cfg.batch.population)) out.push_back(d);
  }
  if (out.empty()) out.push_back(cfg.run.driver);
  return out;
}

/// Cross product scenarios x drivers x strategies, in that nesting order.
inline std::vector<RunConfig> expand_batch(const AppConfig& cfg) {
  std::vector<ScenarioKind> scenarios = cfg.batch.scenarios;
  if (scenarios.empty()) scenarios.push_back(cfg.run.scenario.kind);
  std::vector<TransitionKind> strategies = cfg.batch.strategies;
  if (strategies.empty()) {
    strategies.assign(kAllTransitions.begin(), kAllTransitions.end());
  }
  const auto drivers = batch_drivers(cfg);
  std::vector<RunConfig> out;
  for (ScenarioKind sk : scenarios) {
    const Scenario sc = scenario_for(cfg, sk);
    for (const auto& d : drivers) {
      for (TransitionKind tk : strategies) {
        RunConfig rc = cfg.run;
        rc.scenario = sc;
        rc.driver = d;
        rc.transition.kind = tk;
        out.push_back(std::move(rc));
      }
    }
  }
  return out;
}

}  // namespace takeover

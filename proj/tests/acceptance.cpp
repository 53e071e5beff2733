// Acceptance checks 1-7. Prints one PASS/FAIL line per check.
//   acceptance          run all
//   acceptance 2 5      run a subset
// Exit status is nonzero when any selected check fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "takeover/config.hpp"
#include "takeover/driver.hpp"
#include "takeover/game.hpp"
#include "takeover/metrics.hpp"
#include "takeover/report.hpp"
#include "takeover/sim.hpp"
#include "takeover/transition.hpp"
#include "takeover/vehicle.hpp"

using namespace takeover;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// 1. Coupled solver with a silent ADAS reduces to single-player LQR.
Outcome lqr_oracle() {
  const LinearModel model = build_system_matrices({});
  const double dt = 0.01;
  const Mat6 q = diag6({0, 0, 1, 5, 0, 0});
  const GameWeights driver{q, 1.0, q};
  const GameWeights adas{Mat6::Zero(), 1.0, Mat6::Zero()};

  const auto t0 = std::chrono::steady_clock::now();
  const CoupledSolution sol = solve_coupled_riccati(model, driver, adas, 20.0, dt);
  const double elapsed = seconds_since(t0);

  const Mat6 p_ref = oracle::lqr_fixed_point(model.a, model.b_driver, q, 1.0, dt);
  const double dp = (sol.driver.p.front() - p_ref).cwiseAbs().maxCoeff();
  const double adas_p = sol.adas.p.front().cwiseAbs().maxCoeff();

  Vec6 ey = Vec6::Zero();
  ey(kLateral) = 1.0;
  const double torque = feedback_torque(sol.driver, 0, ey);
  const double torque_ref = -(model.b_driver.transpose() * p_ref * ey)(0);
  const double dtorque = std::abs(torque - torque_ref);

  Outcome o;
  o.pass = dp <= 1e-6 && dtorque <= 1e-6 && adas_p == 0.0 && elapsed < 1.0;
  o.detail = fmt("max|P_D - P_lqr| = %.2e, torque diff %.2e, P_A max %.1e, %.3f s",
                 dp, dtorque, adas_p, elapsed);
  return o;
}

// 2. No unilateral single-sample deviation lowers the deviating player's cost.
Outcome nash_stationarity() {
  const LinearModel model = build_system_matrices({});
  const double dt = 0.01;
  const int steps = 10;
  const DiscreteModel dm = discretize(model, dt);
  const Mat6 qd = diag6({0, 0, 1, 5, 0, 0});
  const Mat6 qa = diag6({0, 0, 0, 5, 0, 0});
  const GameWeights wd{qd, 1.0, qd};
  const GameWeights wa{qa, 1.0, qa};

  const auto t0 = std::chrono::steady_clock::now();
  const CoupledSolution sol =
      solve_coupled_riccati(model, wd, wa, steps * dt, dt);
  Vec6 x0 = Vec6::Zero();
  x0(kLateral) = 1.0;

  auto cost = [&](const oracle::PlayedGame& g, int player) {
    const GameWeights& w = player == 0 ? wd : wa;
    WeightSchedule s;
    s.q.assign(g.errors.size(), w.q);
    s.r = w.r;
    s.s = w.s;
    return cost_of_run(g.errors, player == 0 ? g.driver : g.adas, s, dt);
  };

  const oracle::PlayedGame nominal = oracle::play(sol, dm, x0);
  double worst = 0.0;  // most negative cost change
  int cases = 0;
  for (int player = 0; player < 2; ++player) {
    const double j0 = cost(nominal, player);
    for (int k = 0; k < steps; ++k) {
      for (double eps : {1e-3, -1e-3}) {
        const double j = cost(oracle::play(sol, dm, x0, player, k, eps), player);
        worst = std::min(worst, j - j0);
        ++cases;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst >= -1e-6 && elapsed < 10.0;
  o.detail = fmt("%d perturbations, largest cost decrease %.2e (slack 1e-6), %.3f s",
                 cases, -worst, elapsed);
  return o;
}

// 3. Transition laws on dense grids; exact comparisons only.
Outcome transition_suite() {
  TransitionSpec spec;
  spec.t_start = 3.0;
  spec.t_end = 8.0;
  std::vector<double> times;
  for (int i = 0; i <= 10000; ++i) times.push_back(i * 0.001);
  std::vector<ErrorSignals> errs;
  for (int i = -40; i <= 40; ++i) {
    for (int j = -30; j <= 30; ++j) errs.push_back({i * 0.05, j * 0.01});
  }

  long checks = 0;
  std::vector<std::string> failures;
  auto fail = [&](const std::string& what) {
    if (failures.size() < 3) failures.push_back(what);
  };

  for (TransitionKind kind : kAllTransitions) {
    spec.kind = kind;
    const std::string name(to_string(kind));
    for (double t : times) {
      for (const auto& e : kind == TransitionKind::kAdaptive
                               ? errs
                               : std::vector<ErrorSignals>{{0.0, 0.0}, {1.0, -0.2}}) {
        const double a = alpha(spec, t, e);
        ++checks;
        if (!(a >= 0.0 && a <= 1.0)) fail(name + ": alpha out of range");
        if (t < spec.t_start && a != 0.0) fail(name + ": nonzero before t_S");
        if (t >= spec.t_end && a != 1.0) fail(name + ": not one after t_E");
        if (kind == TransitionKind::kCooperative && t >= spec.t_start &&
            t < spec.t_end && a != 0.5) {
          fail("cooperative: not 0.5 in window");
        }
      }
    }
    if (kind == TransitionKind::kStep || kind == TransitionKind::kLinear ||
        kind == TransitionKind::kExponential) {
      double prev = -1.0;
      for (double t : times) {
        const double a = alpha(spec, t);
        ++checks;
        if (t >= spec.t_start && t < spec.t_end && a < prev) {
          fail(name + ": decreasing in window at t=" + std::to_string(t));
        }
        prev = a;
      }
    }
  }

  spec.kind = TransitionKind::kAdaptive;
  for (double t : {3.0, 4.25, 5.5, 7.999}) {
    std::vector<std::pair<double, double>> dev_alpha;
    for (const auto& e : errs) {
      dev_alpha.emplace_back(
          std::abs(spec.lateral_gain * e.lateral + spec.heading_gain * e.heading),
          alpha(spec, t, e));
    }
    std::sort(dev_alpha.begin(), dev_alpha.end());
    for (std::size_t i = 1; i < dev_alpha.size(); ++i) {
      ++checks;
      if (dev_alpha[i].second > dev_alpha[i - 1].second) {
        fail("adaptive: alpha increases with deviation");
      }
    }
  }

  Outcome o;
  o.pass = failures.empty();
  o.detail = fmt("%ld assertions", checks);
  for (const auto& f : failures) o.detail += "; " + f;
  return o;
}

// 4. Full ADAS authority tracks the lane change.
Outcome tracking_fidelity() {
  RunConfig cfg;
  cfg.scenario = build_scenario(ScenarioKind::kLaneChange);
  cfg.transition.t_start = cfg.scenario.duration;
  cfg.transition.t_end = cfg.scenario.duration;
  cfg.reuse_solutions = false;  // full 150-step solve at every step

  const auto t0 = std::chrono::steady_clock::now();
  const RunLog log = run_takeover(cfg);
  const double elapsed = seconds_since(t0);

  double max_beta = 0.0;
  for (const auto& r : log.records) {
    max_beta = std::max(max_beta, std::abs(r.x(kSideSlip)));
  }
  const double y_end = log.records.back().x(kLateral);
  const double t_end = log.records.back().t;
  Outcome o;
  o.pass = log.ok() && std::abs(t_end - 10.0) < 1e-9 &&
           std::abs(y_end - 3.75) <= 0.1 && max_beta < 0.05 && elapsed < 5.0;
  o.detail = fmt("y(%.2f) = %.4f m, max|beta| = %.4f rad, %.3f s%s", t_end, y_end,
                 max_beta, elapsed, log.ok() ? "" : ", run failed");
  return o;
}

// 5. Strategy ordering over a synthetic driver population.
Outcome strategy_ordering() {
  PopulationSpec pop;  // 10 drivers, documented ranges, seed 1
  std::vector<RunConfig> cfgs;
  RunConfig base;
  base.scenario = build_scenario(ScenarioKind::kDoubleLaneChange);
  for (const auto& d : synth_population(pop)) {
    for (TransitionKind k : kAllTransitions) {
      RunConfig c = base;
      c.driver = d;
      c.transition.kind = k;
      cfgs.push_back(c);
    }
  }
  const auto logs = run_batch(cfgs);
  for (const auto& l : logs) {
    if (!l.ok()) return {false, "run " + l.file_stem() + " failed: " + l.failure->message};
  }
  const ScenarioSummary s = summarize(logs);
  const double step = s.table.find("step")->mean_total;
  const double coop = s.table.find("cooperative")->mean_total;
  const double adapt = s.table.find("adaptive")->mean_total;
  const double coop_gain = 100.0 * (step - coop) / step;
  const double adapt_gain = 100.0 * (coop - adapt) / coop;
  Outcome o;
  o.pass = step > coop && coop > adapt && coop_gain >= 5.0 && adapt_gain >= 5.0;
  o.detail = fmt("mean eps_total step %.4f, cooperative %.4f (%.2f%% below step), "
                 "adaptive %.4f (%.2f%% below cooperative)",
                 step, coop, coop_gain, adapt, adapt_gain);
  return o;
}

// 6. Driver Q round trip, noiseless and with torque noise.
Outcome driver_round_trip() {
  const LinearModel model = build_system_matrices({});
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  const Mat6 q_true = diag6({0, 0, 1, 5, 0, 0});
  const std::vector<int> nonzero = {kYaw, kLateral};

  auto rel_errors = [&](const Mat6& q) {
    std::vector<double> e;
    for (int i : nonzero) e.push_back(std::abs(q(i, i) - q_true(i, i)) / q_true(i, i));
    return e;
  };

  SynthOptions clean;
  const auto exact = estimate_q(synth_driver_log(q_true, sc, model, clean), model, 1.0);
  const auto e0 = rel_errors(exact.profile.q_max);
  const bool clean_ok = std::all_of(e0.begin(), e0.end(), [](double e) { return e <= 0.05; });

  std::vector<std::vector<double>> per_entry(nonzero.size());
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthOptions noisy;
    noisy.noise_sigma = 0.05;
    noisy.seed = seed;
    const auto fit = estimate_q(synth_driver_log(q_true, sc, model, noisy), model, 1.0);
    const auto e = rel_errors(fit.profile.q_max);
    for (std::size_t i = 0; i < e.size(); ++i) per_entry[i].push_back(e[i]);
  }
  std::vector<double> medians;
  for (auto& v : per_entry) {
    std::sort(v.begin(), v.end());
    medians.push_back(0.5 * (v[9] + v[10]));
  }
  const bool noisy_ok =
      std::all_of(medians.begin(), medians.end(), [](double m) { return m <= 0.20; });

  Outcome o;
  o.pass = clean_ok && noisy_ok;
  o.detail = fmt("noiseless rel. error psi %.2e, y %.2e (tol 5%%) %s; "
                 "sigma 0.05 median rel. error psi %.3f, y %.3f (tol 20%%) %s",
                 e0[0], e0[1], clean_ok ? "ok" : "FAIL", medians[0], medians[1],
                 noisy_ok ? "ok" : "FAIL");
  return o;
}

// 7. Identical inputs give identical bytes; CSVs reload exactly.
Outcome determinism() {
  std::vector<RunConfig> cfgs;
  const auto drivers = synth_population(PopulationSpec{});
  for (ScenarioKind sk : {ScenarioKind::kLaneChange, ScenarioKind::kDoubleLaneChange}) {
    for (TransitionKind tk : kAllTransitions) {
      RunConfig c;
      c.scenario = build_scenario(sk);
      c.transition.kind = tk;
      c.driver = drivers[3];
      cfgs.push_back(c);
    }
  }
  auto to_csv = [](const RunLog& l) {
    std::ostringstream s;
    write_run_log(s, l);
    return s.str();
  };
  const auto a = run_batch(cfgs, 1);
  const auto b = run_batch(cfgs, 3);
  int identical = 0, reloaded = 0;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const std::string ca = to_csv(a[i]);
    const std::string cb = to_csv(b[i]);
    const std::string cc = to_csv(run_takeover(cfgs[i]));
    if (ca == cb && ca == cc) ++identical;
    std::istringstream in(ca);
    const RunLog back = run_log_from_table(csv::parse(in, "memory"), "memory");
    if (back.records == a[i].records && to_csv(back) == ca) ++reloaded;
  }
  SynthOptions so;
  so.noise_sigma = 0.05;
  so.seed = 42;
  const LinearModel model = build_system_matrices({});
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  const auto l1 = synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model, so);
  const auto l2 = synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model, so);
  bool synth_same = l1.samples.size() == l2.samples.size();
  for (std::size_t i = 0; synth_same && i < l1.samples.size(); ++i) {
    synth_same = l1.samples[i].x == l2.samples[i].x && l1.samples[i].u == l2.samples[i].u;
  }
  const int n = static_cast<int>(cfgs.size());
  Outcome o;
  o.pass = identical == n && reloaded == n && synth_same;
  o.detail = fmt("%d/%d runs byte-identical across reruns and worker counts, "
                 "%d/%d CSVs reload exactly, seeded noise %s",
                 identical, n, reloaded, n, synth_same ? "repeats" : "differs");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> checks = {
      {"LQR oracle equivalence", lqr_oracle},
      {"Nash stationarity", nash_stationarity},
      {"transition function suite", transition_suite},
      {"full-ADAS tracking fidelity", tracking_fidelity},
      {"strategy ordering on the double lane change", strategy_ordering},
      {"driver Q round trip", driver_round_trip},
      {"determinism and CSV round trip", determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (int i = 1; i <= static_cast<int>(checks.size()); ++i) selected.push_back(i);
  }
  int failed = 0;
  for (int id : selected) {
    if (id < 1 || id > static_cast<int>(checks.size())) {
      std::printf("FAIL %d unknown check\n", id);
      ++failed;
      continue;
    }
    const auto& [name, fn] = checks[static_cast<std::size_t>(id - 1)];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

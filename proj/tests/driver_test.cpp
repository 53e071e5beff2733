#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "takeover/driver.hpp"

using namespace takeover;

namespace {

const LinearModel& model() {
  static const LinearModel m = build_system_matrices({});
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("takeover_driver_" + name);
}

TEST(Synth, LateralOnlyDriverConvergesToLane) {
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  const DrivingLog log = synth_driver_log(diag6({0, 0, 0, 5, 0, 0}), sc, model());
  ASSERT_EQ(log.samples.size(), 101u);
  EXPECT_EQ(log.interval, 0.1);
  EXPECT_NEAR(log.samples.back().x(kLateral), 3.75, 0.05);
  // tracking error shrinks over the final seconds
  EXPECT_LT(std::abs(log.samples.back().x(kLateral) - 3.75),
            std::abs(log.samples[60].x(kLateral) - 3.75));
}

TEST(Synth, ZeroWeightDriverDoesNothing) {
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  const DrivingLog log = synth_driver_log(Mat6::Zero(), sc, model());
  for (const auto& s : log.samples) {
    EXPECT_EQ(s.u, 0.0);
    EXPECT_TRUE(s.x.isZero(0.0));  // open loop from rest stays at rest
  }
}

TEST(Synth, SeededNoiseRepeats) {
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  SynthOptions o;
  o.noise_sigma = 0.05;
  o.seed = 9;
  const auto a = synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model(), o);
  const auto b = synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model(), o);
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].u, b.samples[i].u);
  }
  o.seed = 10;
  const auto c = synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model(), o);
  EXPECT_NE(a.samples[20].u, c.samples[20].u);
  o.noise_sigma = -1.0;
  EXPECT_THROW(synth_driver_log(Mat6::Zero(), sc, model(), o), ParameterError);
}

TEST(Estimate, NoiselessRoundTrip) {
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  const Mat6 q = diag6({0, 0, 1, 5, 0, 0});
  const auto fit = estimate_q(synth_driver_log(q, sc, model()), model(), 1.0);
  EXPECT_NEAR(fit.profile.q_max(kYaw, kYaw), 1.0, 0.05);
  EXPECT_NEAR(fit.profile.q_max(kLateral, kLateral), 5.0, 0.25);
  EXPECT_LT(fit.residual_rms, 1e-6);
}

TEST(Estimate, DistinguishesDrivers) {
  const Scenario sc = build_scenario(ScenarioKind::kDoubleLaneChange);
  const Mat6 qa = diag6({0, 0, 0, 5, 0, 0});
  const Mat6 qb = diag6({0, 0, 20, 200, 0, 0});
  const auto la = synth_driver_log(qa, sc, model());
  const auto lb = synth_driver_log(qb, sc, model());
  EXPECT_GT(std::abs(la.samples[30].u - lb.samples[30].u), 1e-3);
  const auto fa = estimate_q(la, model(), 1.0);
  const auto fb = estimate_q(lb, model(), 1.0);
  EXPECT_NEAR(fa.profile.q_max(kLateral, kLateral), 5.0, 0.25);
  EXPECT_NEAR(fb.profile.q_max(kLateral, kLateral), 200.0, 10.0);
  EXPECT_NEAR(fb.profile.q_max(kYaw, kYaw), 20.0, 1.0);
}

TEST(Estimate, ResultIsSymmetricPositiveDefinite) {
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  SynthOptions o;
  o.noise_sigma = 0.05;
  o.seed = 3;
  const auto fit =
      estimate_q(synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model(), o), model(), 1.0);
  const Mat6& q = fit.profile.q_max;
  EXPECT_EQ(q, q.transpose());
  EXPECT_TRUE(q.isDiagonal(0.0));
  for (int i = 0; i < kStateDim; ++i) EXPECT_GE(q(i, i), 1e-8);
}

TEST(Estimate, TimeShiftInvariant) {
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  DrivingLog log = synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model());
  const auto a = estimate_q(log, model(), 1.0);
  for (auto& s : log.samples) s.t += 123.4;
  const auto b = estimate_q(log, model(), 1.0);
  EXPECT_EQ(a.profile.q_max, b.profile.q_max);
}

TEST(Estimate, UnexcitedLogIsUnidentifiable) {
  DrivingLog log;
  for (int k = 0; k < 20; ++k) log.samples.push_back({k * 0.1, StateVector::Zero(), StateVector::Zero(), 0.0});
  EXPECT_THROW(estimate_q(log, model(), 1.0), UnidentifiableError);
}

TEST(Estimate, ShortOrIrregularLogsRejected) {
  DrivingLog log;
  for (int k = 0; k < 5; ++k) log.samples.push_back({k * 0.1, StateVector::Ones(), StateVector::Zero(), 0.0});
  EXPECT_THROW(estimate_q(log, model(), 1.0), IoError);
  log.samples.clear();
  for (int k = 0; k < 12; ++k) log.samples.push_back({k * (k == 7 ? 0.11 : 0.1), StateVector::Ones(), StateVector::Zero(), 0.0});
  EXPECT_THROW(estimate_q(log, model(), 1.0), IoError);
}

TEST(Estimate, FullStructureFitsLog) {
  const Scenario sc = build_scenario(ScenarioKind::kDoubleLaneChange);
  const auto log = synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model());
  EstimateOptions o;
  o.structure = QStructure::kFull;
  const auto fit = estimate_q(log, model(), 1.0, o);
  EXPECT_LT(fit.residual_rms, 1e-3);
  Eigen::SelfAdjointEigenSolver<Mat6> es(fit.profile.q_max);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(DrivingLogCsv, RoundTripAndShuffledHeader) {
  const Scenario sc = build_scenario(ScenarioKind::kLaneChange);
  SynthOptions o;
  o.noise_sigma = 0.05;
  const auto log = synth_driver_log(diag6({0, 0, 1, 5, 0, 0}), sc, model(), o);
  const auto path = temp_file("log.csv");
  write_driving_log(path.string(), log);
  const DrivingLog back = read_driving_log(path.string());
  ASSERT_EQ(back.samples.size(), log.samples.size());
  for (std::size_t i = 0; i < log.samples.size(); ++i) {
    EXPECT_EQ(back.samples[i].x, log.samples[i].x);
    EXPECT_EQ(back.samples[i].u, log.samples[i].u);
    EXPECT_EQ(back.samples[i].x_ref, log.samples[i].x_ref);
  }

  // reorder columns: reverse every line
  std::ifstream in(path);
  std::ostringstream shuffled;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    for (std::size_t i = cells.size(); i-- > 0;) {
      shuffled << cells[i] << (i ? "," : "\n");
    }
  }
  std::istringstream sin(shuffled.str());
  const DrivingLog again = driving_log_from_table(csv::parse(sin, "shuffled"), "shuffled");
  EXPECT_EQ(again.samples.back().u, log.samples.back().u);
  std::filesystem::remove(path);
}

TEST(DrivingLogCsv, MissingColumnNamed) {
  std::istringstream in("t,beta,psidot,psi,y,delta,deltadot,yref,psiref\n0,0,0,0,0,0,0,0,0\n");
  try {
    driving_log_from_table(csv::parse(in, "log.csv"), "log.csv");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("'u'"), std::string::npos);
  }
}

TEST(Profile, JsonRoundTrip) {
  DriverProfile p;
  p.q_max = diag6({0.1, 0, 2.5, 7, 0, 1e-8});
  p.r = 1.0;
  p.label = "alice";
  const auto path = temp_file("profile.json");
  write_profile(path.string(), p);
  const DriverProfile back = read_profile(path.string());
  EXPECT_EQ(back.q_max, p.q_max);
  EXPECT_EQ(back.label, "alice");
  p.q_max(2, 3) = p.q_max(3, 2) = 0.5;
  write_profile(path.string(), p);
  EXPECT_EQ(read_profile(path.string()).q_max, p.q_max);
  std::filesystem::remove(path);
}

TEST(Population, DeterministicWithinRanges) {
  PopulationSpec spec;
  const auto a = synth_population(spec);
  const auto b = synth_population(spec);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].q_max, b[i].q_max);
    const double qy = a[i].q_max(kLateral, kLateral);
    const double qpsi = a[i].q_max(kYaw, kYaw);
    EXPECT_GE(qy, spec.lateral_min);
    EXPECT_LE(qy, spec.lateral_max);
    EXPECT_GE(qpsi, spec.heading_min);
    EXPECT_LE(qpsi, spec.heading_max);
    EXPECT_EQ(a[i].label, "d" + std::to_string(i));
  }
  spec.seed = 2;
  EXPECT_NE(synth_population(spec)[0].q_max, a[0].q_max);
  spec.count = 0;
  EXPECT_THROW(synth_population(spec), ConfigError);
}

}  // namespace

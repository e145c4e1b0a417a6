#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "coco/csv.hpp"
#include "coco/harness.hpp"
#include "coco/linalg.hpp"
#include "coco/stability.hpp"

namespace coco::harness {
namespace {

SimConfig switching_config(Algorithm alg, double alpha, int steps, std::uint64_t seed = 1) {
  SimConfig c;
  c.scenario = "switching";
  c.algorithm = alg;
  c.alpha = alpha;
  c.steps = steps;
  c.seed = seed;
  return c;
}

std::string to_csv(const Trajectory& t) {
  std::ostringstream os;
  csv::write_trajectory(os, t);
  return os.str();
}

TEST(Simulate, DeadbeatCancelsWithoutNoise) {
  SimConfig c = switching_config(Algorithm::CocoLQ, 0.0, 10);
  c.noise = NoiseKind::Zero;
  const RunResult r = simulate(c);
  ASSERT_EQ(r.trajectory.states.size(), 11u);
  for (std::size_t t = 2; t < r.trajectory.states.size(); ++t) {
    EXPECT_LE(r.trajectory.states[t].norm(), 1e-6) << "t=" << t;
  }
}

TEST(Simulate, NaiveDivergesOnSwitching) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const RunResult r = simulate(switching_config(Algorithm::NaiveLTI, 0.4, 200, seed));
    EXPECT_GT(r.report.sup_state_norm, 1e3) << "seed " << seed;
  }
}

TEST(Simulate, CocoTruncatedNoiseStaysInsideEnvelope) {
  SimConfig c = switching_config(Algorithm::CocoLQ, 0.4, 500, 2);
  c.noise = NoiseKind::TruncatedGaussian;
  const RunResult r = simulate(c);
  ASSERT_FALSE(r.trajectory.terminated);
  const auto p = stability::theorem1_params(0.4, Matrix::Identity(2, 2));
  const stability::IssEnvelope env{0, p.kappa, p.rho, r.report.sup_noise_norm, r.trajectory.states[0].norm()};
  EXPECT_EQ(stability::iss_audit(r.trajectory.states, env).violations, 0);
  for (const auto& row : r.trajectory.rows) {
    EXPECT_LE(row.w.cwiseAbs().maxCoeff(), 3.0 * 0.1 + 1e-15);
  }
}

TEST(Simulate, SinusoidSolvesEveryStepAsAGrows) {
  SimConfig c;
  c.scenario = "sinusoid";
  c.algorithm = Algorithm::CocoLQ;
  c.alpha = 0.4;
  c.steps = 500;
  c.seed = 3;
  const RunResult r = simulate(c);
  ASSERT_FALSE(r.trajectory.terminated);
  ASSERT_EQ(r.trajectory.rows.size(), 500u);
  EXPECT_LE(r.report.sup_state_norm, 10.0);
}

TEST(Simulate, RowsAreConsistent) {
  const RunResult r = simulate(switching_config(Algorithm::CocoLQ, 0.4, 25));
  const Trajectory& t = r.trajectory;
  ASSERT_EQ(t.rows.size(), 25u);
  EXPECT_EQ(t.states.size(), 26u);
  const SymMatrix Q = 0.2 * Matrix::Identity(2, 2);
  const auto plant = scenarios::switching();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const StepRow& row = t.rows[i];
    EXPECT_EQ(row.t, static_cast<int>(i));
    EXPECT_EQ(row.x, t.states[i]);
    EXPECT_EQ(row.status, "feasible");
    EXPECT_GE(row.stage_cost, 0.0);
    EXPECT_NEAR(row.stage_cost, row.x.dot(Q * row.x) + row.u.squaredNorm(), 1e-12);
    const Matrix A = plant->next(row.t, {}).A;
    EXPECT_LE((t.states[i + 1] - (A * row.x + row.u + row.w)).norm(), 1e-12);
  }
  EXPECT_NEAR(r.report.avg_cost, average_cost(t, Q, Matrix::Identity(2, 2)), 1e-12);
}

TEST(Simulate, SeedDeterminismIsByteIdentical) {
  const SimConfig c = switching_config(Algorithm::CocoLQ, 0.35, 60, 42);
  EXPECT_EQ(to_csv(simulate(c).trajectory), to_csv(simulate(c).trajectory));
  SimConfig other = c;
  other.seed = 43;
  EXPECT_NE(to_csv(simulate(c).trajectory), to_csv(simulate(other).trajectory));
}

TEST(Simulate, NoiseIndependentOfController) {
  const RunResult a = simulate(switching_config(Algorithm::CocoLQ, 0.2, 30, 5));
  const RunResult b = simulate(switching_config(Algorithm::CocoLQ, 0.45, 30, 5));
  const RunResult c = simulate(switching_config(Algorithm::OfflineOptimal, 0.45, 30, 5));
  for (int t = 0; t < 30; ++t) {
    EXPECT_EQ(a.trajectory.rows[t].w, b.trajectory.rows[t].w);
    EXPECT_EQ(a.trajectory.rows[t].w, c.trajectory.rows[t].w);
  }
}

TEST(Simulate, InfeasibleStepTerminatesWithStatus) {
  SimConfig c;
  c.scenario = "pendulum";
  c.alpha = 0.4;
  c.steps = 50;
  const RunResult r = simulate(c);
  EXPECT_TRUE(r.trajectory.terminated);
  ASSERT_EQ(r.trajectory.rows.size(), 1u);
  EXPECT_EQ(r.trajectory.rows.back().t, 0);
  EXPECT_EQ(r.trajectory.rows.back().status, "infeasible");
  EXPECT_FALSE(r.trajectory.failure.empty());
}

TEST(Simulate, FallbackRelaxesAlpha) {
  SimConfig c;
  c.scenario = "pendulum";
  c.alpha = 0.4;
  c.fallback = control::RelaxAlpha{};
  c.steps = 30;
  const RunResult r = simulate(c);
  EXPECT_FALSE(r.trajectory.terminated);
  EXPECT_EQ(r.trajectory.rows.front().status, "fallback");
  EXPECT_GT(r.trajectory.rows.front().alpha_used, 0.4);
}

TEST(Simulate, PredictionRefusesAdaptiveScenario) {
  SimConfig c;
  c.scenario = "pendulum";
  c.algorithm = Algorithm::CocoLQPredict;
  c.horizon = 2;
  c.steps = 10;
  EXPECT_THROW(simulate(c), InvalidInput);
}

TEST(Simulate, PredictionCommitsBlocks) {
  SimConfig c;
  c.scenario = "rank-deficient-pair";
  c.algorithm = Algorithm::CocoLQPredict;
  c.alpha = 0.3;
  c.horizon = 2;
  c.steps = 40;
  const RunResult r = simulate(c);
  ASSERT_FALSE(r.trajectory.terminated);
  EXPECT_EQ(r.trajectory.certificates.size(), 20u);
  EXPECT_LT(r.report.sup_state_norm, 1e2);
}

TEST(Validate, RejectsOutOfRange) {
  SimConfig c;
  c.alpha = 1.5;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.steps = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.noise = NoiseKind::TruncatedGaussian;
  c.noise_cap = 0.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = {};
  c.horizon = 0;
  EXPECT_THROW(validate(c), ConfigError);
  EXPECT_NO_THROW(validate(SimConfig{}));
}

TEST(AverageCost, Arithmetic) {
  const SymMatrix Q = 0.2 * Matrix::Identity(2, 2);
  const SymMatrix R = Matrix::Identity(1, 1);
  Trajectory t;
  t.state_dim = 2;
  t.input_dim = 1;
  t.rows.push_back({0, Vector::Zero(2), Vector::Zero(1), Vector::Zero(2), 0.0, "feasible", 0.4});
  EXPECT_DOUBLE_EQ(average_cost(t, Q, R), 0.0);
  t.rows[0].x = Vector::Unit(2, 0);
  EXPECT_DOUBLE_EQ(average_cost(t, Q, R), 0.2);
  t.rows[0].x = Vector::Zero(2);
  t.rows[0].u = Vector::Ones(1);
  t.rows.push_back({1, Vector::Zero(2), Vector::Constant(1, std::sqrt(3.0)), Vector::Zero(2), 0.0, "", 0.0});
  EXPECT_NEAR(average_cost(t, Q, R), 2.0, 1e-15);
  EXPECT_THROW(average_cost(Trajectory{}, Q, R), InvalidInput);
}

TEST(Noise, GaussianSampleCovariance) {
  SimConfig c;
  c.seed = 17;
  Vector shape(2);
  shape << 1.0, 2.0;
  const int n = 100000;
  Matrix cov = Matrix::Zero(2, 2);
  for (int t = 0; t < n; ++t) {
    const Vector w = draw_noise(c, 0.1, shape, t);
    cov += w * w.transpose();
  }
  cov /= n;
  SymMatrix W = Matrix::Zero(2, 2);
  W.diagonal() << 0.01, 0.04;
  EXPECT_LE((cov - W).norm(), 0.05 * W.norm());
}

TEST(Noise, TruncatedAndZero) {
  SimConfig c;
  c.noise = NoiseKind::TruncatedGaussian;
  c.noise_cap = 1.0;
  for (int t = 0; t < 2000; ++t) {
    EXPECT_LE(draw_noise(c, 0.5, Vector::Ones(3), t).cwiseAbs().maxCoeff(), 0.5);
  }
  c.noise = NoiseKind::Zero;
  EXPECT_EQ(draw_noise(c, 0.5, Vector::Ones(3), 4), Vector::Zero(3));
}

TEST(Normalize, OfflineOptimumIsNotBeatenOnAverage) {
  // The backward recursion is optimal in expectation, so compare sums over
  // several realizations instead of a single one.
  double coco = 0.0;
  double offline = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SimConfig c = switching_config(Algorithm::CocoLQ, 0.4, 300, seed);
    c.normalize = true;
    const RunResult r = simulate(c);
    ASSERT_TRUE(r.report.normalized.has_value());
    coco += r.report.avg_cost;
    offline += r.report.avg_cost / *r.report.normalized;
  }
  EXPECT_GE(coco / offline, 1.0 - 1e-9);
}

TEST(Sweep, DeadbeatIsMostExpensiveWhenConstraintInactive) {
  SimConfig base = switching_config(Algorithm::CocoLQ, 0.0, 200, 3);
  base.params = {{"rho", 0.5}, {"a", 1.0}};
  const auto rows = alpha_sweep(base, {0.0, 0.2, 0.45});
  ASSERT_EQ(rows.size(), 3u);
  for (const auto& row : rows) {
    EXPECT_TRUE(row.error.empty()) << row.error;
  }
  EXPECT_GT(rows[0].report.avg_cost, rows[1].report.avg_cost);
  EXPECT_GT(rows[0].report.avg_cost, rows[2].report.avg_cost);
}

TEST(Sweep, RecordsErrorsAndContinues) {
  SimConfig base = switching_config(Algorithm::CocoLQ, 0.0, 20);
  const auto rows = alpha_sweep(base, {0.3, 1.5, 0.4});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_FALSE(rows[1].error.empty());
  EXPECT_TRUE(rows[2].error.empty());
  std::ostringstream os;
  csv::write_sweep(os, rows);
  EXPECT_EQ(os.str().rfind("alpha,avg_cost,normalized,sup_state_norm,sup_noise_norm,steps,diverged,error\n", 0), 0u);
  EXPECT_THROW(alpha_sweep(base, {}), InvalidInput);
}

TEST(Sweep, LowAlphaRunsStayBounded) {
  const SimConfig base = switching_config(Algorithm::CocoLQ, 0.0, 200, 0);
  for (const auto& row : alpha_sweep(base, {0.1, 0.2, 0.3, 0.4, 0.45})) {
    EXPECT_FALSE(row.report.diverged) << row.alpha;
    EXPECT_LT(row.report.sup_state_norm, 10.0) << row.alpha;
  }
}

TEST(Csv, TrajectoryRoundTrip) {
  const RunResult r = simulate(switching_config(Algorithm::CocoLQ, 0.4, 15, 8));
  std::istringstream is(to_csv(r.trajectory));
  const Trajectory back = csv::read_trajectory(is);
  ASSERT_EQ(back.rows.size(), r.trajectory.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    EXPECT_EQ(back.rows[i].x, r.trajectory.rows[i].x);
    EXPECT_EQ(back.rows[i].u, r.trajectory.rows[i].u);
    EXPECT_EQ(back.rows[i].status, r.trajectory.rows[i].status);
    EXPECT_EQ(back.rows[i].alpha_used, r.trajectory.rows[i].alpha_used);
  }
  std::istringstream bad("t,x0,bogus\n");
  EXPECT_THROW(csv::read_trajectory(bad), InvalidInput);
}

TEST(Certify, RecordedTrajectoryPasses) {
  const SimConfig c = switching_config(Algorithm::CocoLQ, 0.4, 100, 6);
  const RunResult r = simulate(c);
  std::istringstream is(to_csv(r.trajectory));
  const auto cert = certify_trajectory(c, csv::read_trajectory(is));
  EXPECT_TRUE(cert.pass);
  EXPECT_EQ(cert.steps.size(), 100u);
}

TEST(KeyValues, ParseAndRoundTrip) {
  std::istringstream is("# comment\nscenario = grid9\nalg=h-horizon\nhorizon=3\n\nparam.dt=0.02  # inline\n");
  const KeyValues kv = read_key_values(is);
  EXPECT_EQ(kv.at("scenario"), "grid9");
  EXPECT_EQ(kv.at("param.dt"), "0.02");
  const SimConfig c = apply_key_values({}, kv);
  EXPECT_EQ(c.scenario, "grid9");
  EXPECT_EQ(c.algorithm, Algorithm::HHorizon);
  EXPECT_EQ(c.horizon, 3);
  EXPECT_DOUBLE_EQ(c.params.at("dt"), 0.02);

  SimConfig d;
  d.alpha = 0.123456789012345;
  d.x0 = Vector::Constant(2, 0.5);
  d.fallback = control::RelaxAlpha{0.9, 0.25};
  d.noise = NoiseKind::TruncatedGaussian;
  const SimConfig e = apply_key_values({}, to_key_values(d));
  EXPECT_EQ(e.alpha, d.alpha);
  ASSERT_TRUE(e.x0.has_value());
  EXPECT_EQ(*e.x0, *d.x0);
  ASSERT_TRUE(e.fallback.has_value());
  EXPECT_EQ(e.fallback->max_alpha, 0.9);
  EXPECT_EQ(e.fallback->growth, 0.25);
  EXPECT_EQ(e.noise, NoiseKind::TruncatedGaussian);
}

TEST(KeyValues, Errors) {
  std::istringstream malformed("alpha 0.4\n");
  EXPECT_THROW(read_key_values(malformed), ConfigError);
  EXPECT_THROW(apply_key_values({}, {{"nonsense", "1"}}), ConfigError);
  EXPECT_THROW(apply_key_values({}, {{"alpha", "abc"}}), ConfigError);
  EXPECT_THROW(apply_key_values({}, {{"alg", "mpc"}}), ConfigError);
}

TEST(Names, RoundTrip) {
  for (auto a : {Algorithm::CocoLQ, Algorithm::CocoLQPredict, Algorithm::NaiveLTI, Algorithm::HHorizon,
                 Algorithm::OfflineOptimal}) {
    EXPECT_EQ(parse_algorithm(to_string(a)), a);
  }
  for (auto n : {NoiseKind::Gaussian, NoiseKind::TruncatedGaussian, NoiseKind::Zero}) {
    EXPECT_EQ(parse_noise(to_string(n)), n);
  }
  EXPECT_EQ(parse_failure_policy("zero-control"), FailurePolicy::ZeroControl);
}

}  // namespace
}  // namespace coco::harness

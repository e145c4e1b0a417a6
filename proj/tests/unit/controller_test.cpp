#include <cmath>

#include <gtest/gtest.h>

#include "coco/controller.hpp"
#include "coco/linalg.hpp"
#include "coco/scenarios.hpp"
#include "coco/stability.hpp"
#include "test_util.hpp"

namespace coco::control {
namespace {

using coco::testing::gaussian;
using coco::testing::random_pd;
using coco::testing::random_with_norm;

// Plain Riccati value iteration, independent of the library's dare().
Matrix oracle_lqr_gain(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R) {
  SymMatrix P = Q;
  for (int k = 0; k < 20000; ++k) {
    const Matrix G = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    const SymMatrix next = Q + A.transpose() * P * (A - B * G);
    const double change = (next - P).norm();
    P = 0.5 * (next + next.transpose());
    if (change < 1e-14 * (1.0 + P.norm())) {
      break;
    }
  }
  return -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
}

Cost identity_cost(int d, int p, double q = 1.0) {
  return {q * Matrix::Identity(d, d), Matrix::Identity(p, p), Matrix::Identity(d, d)};
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

TEST(BuildCocoSdp, BlockAndRowCounts) {
  const Matrix A = Matrix::Identity(2, 2);
  const Matrix B = Matrix::Identity(2, 2);
  const sdp::Problem p = build_coco_sdp(A, B, Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                        Matrix::Identity(2, 2), 0.4);
  EXPECT_EQ(p.block_dims, (std::vector<int>{4, 2}));
  EXPECT_EQ(p.constraints.size(), 6u);
  EXPECT_NO_THROW(sdp::validate(p));
}

TEST(BuildCocoSdp, RejectsIndefiniteCost) {
  const Matrix I = Matrix::Identity(2, 2);
  EXPECT_THROW(build_coco_sdp(I, I, -I, I, I, 0.4), InvalidInput);
  EXPECT_THROW(build_coco_sdp(I, I, I, I, -I, 0.4), InvalidInput);
}

TEST(ExtractGain, ScalarArithmetic) {
  SymMatrix S(2, 2);
  S << 1, 0.5, 0.5, 0.25;
  const PolicyStep step = extract_gain(S, 1);
  EXPECT_NEAR(step.K(0, 0), 0.5, 1e-15);
  EXPECT_EQ(step.status, StepStatus::Ok);
  SymMatrix D = SymMatrix::Identity(3, 3);
  EXPECT_EQ(extract_gain(D, 2).K, Matrix::Zero(1, 2));
}

TEST(ExtractGain, SingularStateBlockRaises) {
  SymMatrix S = SymMatrix::Zero(2, 2);
  S(1, 1) = 1.0;
  EXPECT_THROW(extract_gain(S, 1), ExtractionError);
}

TEST(FeasiblePoint, IdentityInputClosedForm) {
  std::mt19937_64 rng(31);
  const Matrix A = gaussian(rng, 2, 2);
  const SymMatrix W = random_pd(rng, 2);
  const SymMatrix S0 = build_feasible_point(A, Matrix::Identity(2, 2), W);
  SymMatrix expect(4, 4);
  expect << W, -W * A.transpose(), -A * W, A * W * A.transpose();
  EXPECT_LE((S0 - expect).norm(), 1e-12 * (1.0 + expect.norm()));
}

TEST(FeasiblePoint, CancelsDynamicsAndHasRankD) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 3;
    const int p = d + trial % 2;
    const Matrix A = gaussian(rng, d, d);
    const Matrix B = gaussian(rng, d, p);
    const SymMatrix W = random_pd(rng, d);
    const SymMatrix S0 = build_feasible_point(A, B, W);
    Matrix AB(d, d + p);
    AB << A, B;
    EXPECT_LE((AB * S0 * AB.transpose()).norm(), 1e-10 * (1.0 + S0.norm()));
    const Vector ev = linalg::sym_eigenvalues(S0);
    EXPECT_EQ((ev.array() > 1e-10).count(), d);
  }
}

TEST(FeasiblePoint, GainIsDeadbeatForInvertibleB) {
  std::mt19937_64 rng(33);
  const Matrix A = gaussian(rng, 2, 2);
  const Matrix B = gaussian(rng, 2, 2);
  const PolicyStep step = extract_gain(build_feasible_point(A, B, Matrix::Identity(2, 2)), 2);
  EXPECT_LE((step.K + B.inverse() * A).norm(), 1e-9);
}

TEST(FeasiblePoint, RowRankDeficientRaises) {
  Matrix B(2, 1);
  B << 1, 0;
  EXPECT_THROW(build_feasible_point(Matrix::Identity(2, 2), B, Matrix::Identity(2, 2)), NotFullRowRank);
}

TEST(CocoStep, ScalarMatchesGoldenRatioGain) {
  const PolicyStep step = coco_step(scalar(1), scalar(1), identity_cost(1, 1), {0.4, std::nullopt, {}});
  ASSERT_EQ(step.status, StepStatus::Ok);
  // P = (1 + sqrt 5)/2, K = -P/(1 + P).
  const double P = 0.5 * (1.0 + std::sqrt(5.0));
  EXPECT_NEAR(step.K(0, 0), -P / (1.0 + P), 1e-6);
  EXPECT_NEAR(step.K(0, 0), -0.6180, 1e-4);
}

TEST(CocoStep, AlphaZeroIsDeadbeat) {
  std::mt19937_64 rng(34);
  const Matrix A = gaussian(rng, 2, 2);
  const PolicyStep step = coco_step(A, Matrix::Identity(2, 2), identity_cost(2, 2), {0.0, std::nullopt, {}});
  ASSERT_EQ(step.status, StepStatus::Ok);
  EXPECT_LE((step.K + A).norm(), 1e-6 * (1.0 + A.norm()));
}

TEST(CocoStep, SwitchingPairPassesPerStepChecks) {
  const auto provider = scenarios::switching();
  const Cost cost = identity_cost(2, 2, 0.2);
  for (int t = 0; t < 2; ++t) {
    const Dynamics dyn = provider->next(t, {});
    const PolicyStep step = coco_step(dyn.A, dyn.B, cost, {0.4, std::nullopt, {}});
    ASSERT_EQ(step.status, StepStatus::Ok);
    const auto cert = stability::certify_sequence({{dyn.A, dyn.B, step.K, step.sigma_xx}}, 0.4, cost.W);
    EXPECT_TRUE(cert.pass) << "t=" << t;
    EXPECT_GT(cert.margin_L(), 0.0);
  }
}

// Realizability and covariance bounds at every Ok step, plus DARE agreement
// whenever the covariance constraint is slack.
TEST(CocoStep, RandomSystemProperties) {
  std::mt19937_64 rng(35);
  std::uniform_real_distribution<double> alpha_dist(0.05, 0.49);
  int compared = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int d = 1 + trial % 3;
    const int p = d;
    const Matrix A = random_with_norm(rng, d, d, 0.2 + 0.8 * (trial % 4) / 3.0);
    const Matrix B = gaussian(rng, d, p) + Matrix::Identity(d, p);
    const double alpha = alpha_dist(rng);
    const Cost cost{random_pd(rng, d), random_pd(rng, p, 0.5), random_pd(rng, d, 0.5)};
    const PolicyStep step = coco_step(A, B, cost, {alpha, std::nullopt, {}});
    ASSERT_EQ(step.status, StepStatus::Ok) << "trial " << trial;
    EXPECT_LE(step.realizability_residual, 1e-5 * (1.0 + step.sigma_uu.norm()));
    const double scale = 1.0 + cost.W.norm();
    EXPECT_GE(linalg::min_eig(step.sigma_xx - cost.W), -1e-7 * scale);
    EXPECT_GE(linalg::min_eig(cost.W / (1.0 - alpha) - step.sigma_xx), -1e-7 * scale);
    if (step.slack_min_eig > 1e-4) {
      const Matrix K = oracle_lqr_gain(A, B, cost.Q, cost.R);
      EXPECT_LE((step.K - K).norm(), 1e-5 * (1.0 + K.norm())) << "trial " << trial;
      ++compared;
    }
  }
  EXPECT_GE(compared, 5);
}

TEST(CocoStep, LqrSdpMatchesRiccati) {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3;
    const int p = 1 + trial % 2;
    const Matrix A = random_with_norm(rng, d, d, 1.2);
    const Matrix B = gaussian(rng, d, p);
    const SymMatrix Q = Matrix::Identity(d, d);
    const SymMatrix R = Matrix::Identity(p, p);
    const SymMatrix W = Matrix::Identity(d, d);
    const sdp::Solution sol = sdp::solve(build_lqr_sdp(A, B, Q, R, W));
    ASSERT_EQ(sol.status, sdp::Status::Optimal);
    const Matrix K = oracle_lqr_gain(A, B, Q, R);
    // The dual slack is diag(Q, R) + [A B]^T P [A B] - diag(P, 0), so its
    // input rows give the Riccati gain directly.
    const SymMatrix& S = sol.dual_slack[0];
    const Matrix K_dual = -S.bottomRightCorner(p, p).ldlt().solve(S.bottomLeftCorner(p, d));
    EXPECT_LE((K_dual - K).norm(), 1e-5 * (1.0 + K.norm())) << "trial " << trial;
    // The primal gain only converges like the square root of the gap.
    EXPECT_LE((extract_gain(sol.primal[0], d).K - K).norm(), 1e-3 * (1.0 + K.norm())) << "trial " << trial;
  }
}

TEST(CocoStep, InfeasibleWithoutFallbackAndRecoveredWithIt) {
  // Rank-deficient B with an unstable uncontrolled mode: no stationary
  // covariance inside the alpha box.
  Matrix A(2, 2);
  A << 1, 0, 0.5, 2;
  Matrix B(2, 1);
  B << 1, 0;
  const Cost cost = identity_cost(2, 1);
  const PolicyStep step = coco_step(A, B, cost, {0.3, std::nullopt, {}});
  EXPECT_NE(step.status, StepStatus::Ok);
  EXPECT_EQ(step.attempts, 1);
}

TEST(Lift, HorizonOneIsIdentity) {
  const Matrix A = Matrix::Identity(2, 2) * 0.5;
  Matrix B(2, 1);
  B << 1, 2;
  const LiftedSystem l = lift({{A, B}}, Matrix::Identity(1, 1), Matrix::Identity(2, 2));
  EXPECT_EQ(l.A_tilde, A);
  EXPECT_EQ(l.B_tilde, B);
  EXPECT_EQ(l.W_tilde, Matrix::Identity(2, 2));
  EXPECT_EQ(l.horizon, 1);
}

TEST(Lift, RankDeficientPairBecomesFullRank) {
  const double eps = 0.5;
  Matrix A1(2, 2);
  A1 << 1, 0, eps, 2;
  Matrix B(2, 1);
  B << 1, 0;
  const LiftedSystem l = lift({{Matrix::Identity(2, 2), B}, {A1, B}}, Matrix::Identity(1, 1),
                              Matrix::Identity(2, 2));
  Matrix expect(2, 2);
  expect << 1, 1, 0, eps;
  EXPECT_LE((l.B_tilde - expect).norm(), 1e-15);
  EXPECT_GT(l.sigma, 0.0);
  EXPECT_EQ(l.R_tilde, Matrix::Identity(2, 2));

  Matrix A0(2, 2);
  A0 << 1, 0, 0, 2;
  const auto deficient = lift({{Matrix::Identity(2, 2), B}, {A0, B}}, Matrix::Identity(1, 1),
                              Matrix::Identity(2, 2));
  EXPECT_NEAR(deficient.sigma, 0.0, 1e-12);
}

TEST(Lift, IdentityTransitionDoublesNoise) {
  const Matrix I = Matrix::Identity(2, 2);
  const SymMatrix W = 0.3 * I;
  const LiftedSystem l = lift({{I, I}, {I, I}}, I, W);
  EXPECT_LE((l.W_tilde - 2.0 * W).norm(), 1e-15);
}

TEST(Lift, RejectsBadWindows) {
  EXPECT_THROW(lift({}, Matrix::Identity(1, 1), Matrix::Identity(2, 2)), InvalidInput);
  const Matrix I = Matrix::Identity(2, 2);
  EXPECT_THROW(lift({{I, I}, {Matrix::Identity(3, 3), I}}, I, I), InvalidInput);
}

TEST(PredictStep, HorizonOneMatchesCocoStep) {
  const auto provider = scenarios::switching();
  const Dynamics dyn = provider->next(0, {});
  const Cost cost = identity_cost(2, 2, 0.2);
  const CocoConfig config{0.4, std::nullopt, {}};
  const PredictStep pred = coco_predict_step({dyn}, cost, config);
  const PolicyStep step = coco_step(dyn.A, dyn.B, cost, config);
  EXPECT_LE((pred.policy.K - step.K).norm(), 1e-12);
}

TEST(PredictStep, PlannedControlsReproduceLiftedUpdate) {
  const auto provider = scenarios::rank_deficient_pair(0.5);
  const auto window = provider->prediction_window(0, 2);
  const Cost cost = identity_cost(2, 1, 0.2);
  const PredictStep pred = coco_predict_step(window, cost, {0.3, std::nullopt, {}});
  ASSERT_EQ(pred.policy.status, StepStatus::Ok);
  const Vector x0 = Vector::Ones(2);
  Vector x = x0;
  for (int s = 0; s < 2; ++s) {
    x = window[s].A * x + window[s].B * pred.planned_control(x0, s);
  }
  const Vector lifted = (pred.lifted.A_tilde + pred.lifted.B_tilde * pred.policy.K) * x0;
  EXPECT_LE((x - lifted).norm(), 1e-10);

  // Lifted certificate: ||A~ + B~ K|| <= sqrt(alpha) kappa_W / sqrt(1 - alpha).
  const double bound = std::sqrt(0.3) * linalg::condition_number(pred.lifted.W_tilde) / std::sqrt(0.7);
  EXPECT_LE(linalg::spectral_norm(pred.lifted.A_tilde + pred.lifted.B_tilde * pred.policy.K), bound + 1e-7);
}

TEST(PredictStep, DeficientLiftRaises) {
  const auto provider = scenarios::rank_deficient_pair(0.0);
  const auto window = provider->prediction_window(0, 2);
  EXPECT_THROW(coco_predict_step(window, identity_cost(2, 1), {0.3, std::nullopt, {}}), InfeasibleLift);
}

TEST(EstimationTolerance, SubstitutionAtPointFour) {
  const EstimationTolerance t = estimation_tolerance(0.4, Matrix::Identity(2, 2), 1.0);
  EXPECT_NEAR(t.kappa, 1.2910, 1e-4);
  EXPECT_NEAR(t.gamma, 0.3675, 1e-4);
  EXPECT_NEAR(t.rho, 0.8165, 1e-4);
  EXPECT_NEAR(t.delta_max, (0.7746 - 0.6325) / 0.3675, 1e-3);
  EXPECT_NEAR(t.rho_prime(0.0), t.rho, 1e-12);
}

TEST(EstimationTolerance, RhoPrimeApproachesOne) {
  const EstimationTolerance t = estimation_tolerance(0.4, Matrix::Identity(2, 2), 2.0);
  double prev = 0.0;
  for (double f : {0.5, 0.9, 0.99, 0.9999}) {
    const double r = t.rho_prime(f * t.delta_max);
    EXPECT_LT(r, 1.0);
    EXPECT_GT(r, prev);
    prev = r;
  }
  EXPECT_GT(prev, 0.9999);
  EXPECT_THROW(t.rho_prime(t.delta_max), OutOfRange);
}

TEST(EstimationTolerance, AlphaZeroAndRange) {
  const EstimationTolerance t = estimation_tolerance(0.0, Matrix::Identity(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(t.gamma, 1.0);
  EXPECT_DOUBLE_EQ(t.delta_max, 1.0);
  EXPECT_DOUBLE_EQ(t.rho_prime(0.0), 0.0);
  EXPECT_THROW(estimation_tolerance(0.5, Matrix::Identity(2, 2), 1.0), OutOfRange);
  EXPECT_THROW(estimation_tolerance(0.4, Matrix::Identity(2, 2), 0.0), OutOfRange);
}

TEST(KMaxBound, SubstitutionAndScaling) {
  const SymMatrix I = Matrix::Identity(2, 2);
  EXPECT_NEAR(k_max_bound(0.4, I, I, 2.0, 1.0, 1.0), 2.8165, 1e-4);
  EXPECT_NEAR(k_max_bound(0.4, I, I, 2.0, 2.0, 1.0), 2.0 * k_max_bound(0.4, I, I, 2.0, 1.0, 1.0), 1e-12);
  EXPECT_LT(k_max_bound(0.4, I, I, 2.0, 1.0, 1e4), 1e-7);
}

}  // namespace
}  // namespace coco::control

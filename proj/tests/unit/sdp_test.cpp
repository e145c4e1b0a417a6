#include <sstream>

#include <gtest/gtest.h>

#include "coco/controller.hpp"
#include "coco/linalg.hpp"
#include "coco/scenarios.hpp"
#include "coco/sdp.hpp"
#include "test_util.hpp"

namespace coco::sdp {
namespace {

using coco::testing::random_pd;
using coco::testing::random_symmetric;

Matrix unit(int n, int i, int j) {
  Matrix E = Matrix::Zero(n, n);
  E(i, j) = E(j, i) = (i == j) ? 1.0 : 0.5;
  return E;
}

Problem single_block(int n, const SymMatrix& C) {
  Problem p;
  p.block_dims = {n};
  p.objective = {C};
  return p;
}

void add_row(Problem& p, const SymMatrix& A, double b) { p.constraints.push_back({{A}, b}); }

TEST(Solve, PinnedScalar) {
  Problem p = single_block(1, Matrix::Identity(1, 1));
  add_row(p, Matrix::Identity(1, 1), 3.0);
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.primal[0](0, 0), 3.0, 1e-7);
  EXPECT_NEAR(s.objective, 3.0, 1e-7);
  const Metrics m = verify(p, s);
  EXPECT_LE(m.primal_residual, 1e-8);
  EXPECT_LE(m.gap, 1e-8);
}

TEST(Solve, TraceWithPinnedDiagonal) {
  Problem p = single_block(2, Matrix::Identity(2, 2));
  add_row(p, unit(2, 0, 0), 1.0);
  add_row(p, unit(2, 1, 1), 1.0);
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, 2.0, 1e-7);
}

TEST(Solve, NegativePinIsPrimalInfeasible) {
  Problem p = single_block(1, Matrix::Identity(1, 1));
  add_row(p, Matrix::Identity(1, 1), -1.0);
  const Solution s = solve(p);
  EXPECT_EQ(s.status, Status::PrimalInfeasible);
  EXPECT_LE(s.certificate_residual, 1e-6);
}

TEST(Solve, UnboundedIsDualInfeasible) {
  // minimize -X_00 with only X_11 pinned.
  SymMatrix C = Matrix::Zero(2, 2);
  C(0, 0) = -1.0;
  Problem p = single_block(2, C);
  add_row(p, unit(2, 1, 1), 1.0);
  EXPECT_EQ(solve(p).status, Status::DualInfeasible);
}

TEST(Solve, MinEigenvalueOracle) {
  // min <C, X> s.t. tr X = 1, X PSD has optimum lambda_min(C).
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4;
    const SymMatrix C = random_symmetric(rng, n);
    Problem p = single_block(n, C);
    add_row(p, Matrix::Identity(n, n), 1.0);
    const Solution s = solve(p);
    ASSERT_EQ(s.status, Status::Optimal);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(C);
    EXPECT_NEAR(s.objective, ref.eigenvalues()(0), 1e-7) << "n=" << n;
  }
}

TEST(Solve, TwoBlocksSeparate) {
  // Block sizes 1 and 2; minimize x + tr(Y) with x = 2 and Y_00 + Y_11 = 3.
  Problem p;
  p.block_dims = {1, 2};
  p.objective = {Matrix::Identity(1, 1), Matrix::Identity(2, 2)};
  p.constraints.push_back({{Matrix::Identity(1, 1), Matrix::Zero(2, 2)}, 2.0});
  p.constraints.push_back({{Matrix::Zero(1, 1), Matrix::Identity(2, 2)}, 3.0});
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_NEAR(s.objective, 5.0, 1e-7);
}

TEST(Solve, ComplementarityAtOptimal) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3;
    Problem p = single_block(n, random_pd(rng, n));
    add_row(p, Matrix::Identity(n, n), 1.0);
    add_row(p, unit(n, 0, 1), 0.1);
    const Solution s = solve(p);
    ASSERT_EQ(s.status, Status::Optimal);
    EXPECT_LE((s.primal[0].cwiseProduct(s.dual_slack[0])).sum(), 10.0 * p.settings.tol_gap);
  }
}

TEST(Solve, Deterministic) {
  std::mt19937_64 rng(23);
  Problem p = single_block(3, random_symmetric(rng, 3));
  add_row(p, Matrix::Identity(3, 3), 1.0);
  const Solution a = solve(p);
  const Solution b = solve(p);
  EXPECT_EQ(a.metrics.iterations, b.metrics.iterations);
  EXPECT_EQ(a.primal[0], b.primal[0]);
  EXPECT_EQ(a.dual, b.dual);
}

TEST(Solve, CocoStepProblemReverifies) {
  const auto provider = scenarios::switching();
  const Dynamics dyn = provider->next(0, {});
  const Problem p = control::build_coco_sdp(dyn.A, dyn.B, 0.2 * Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                            Matrix::Identity(2, 2), 0.4);
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  const Metrics m = verify(p, s);
  EXPECT_LE(m.gap, 1e-8 * (1.0 + std::abs(s.objective)));
  EXPECT_LE(m.primal_residual, 1e-8);
}

TEST(Validate, DimensionMismatch) {
  Problem p = single_block(2, Matrix::Identity(2, 2));
  add_row(p, Matrix::Identity(3, 3), 1.0);
  EXPECT_THROW(validate(p), InvalidProblem);
  EXPECT_THROW(solve(p), InvalidProblem);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 1.0;
  Problem q = single_block(2, asym);
  EXPECT_THROW(validate(q), InvalidProblem);
}

TEST(Presolve, RejectNamesDependentRow) {
  Problem p = single_block(2, Matrix::Identity(2, 2));
  add_row(p, unit(2, 0, 0), 1.0);
  add_row(p, unit(2, 1, 1), 1.0);
  add_row(p, Matrix::Identity(2, 2), 2.0);  // sum of the first two
  try {
    solve(p);
    FAIL() << "expected PresolveError";
  } catch (const PresolveError& e) {
    ASSERT_EQ(e.rows().size(), 1u);
    EXPECT_EQ(e.rows()[0], 2);
  }
}

TEST(Presolve, DropKeepsConsistentProblem) {
  Problem p = single_block(2, Matrix::Identity(2, 2));
  add_row(p, unit(2, 0, 0), 1.0);
  add_row(p, unit(2, 1, 1), 1.0);
  add_row(p, Matrix::Identity(2, 2), 2.0);
  p.settings.presolve = PresolveMode::Drop;
  const Solution s = solve(p);
  ASSERT_EQ(s.status, Status::Optimal);
  EXPECT_EQ(s.dropped_rows, std::vector<int>{2});
  EXPECT_EQ(s.dual.size(), 3);
  EXPECT_EQ(s.dual(2), 0.0);
  EXPECT_NEAR(s.objective, 2.0, 1e-7);
}

TEST(Verify, ZeroPrimalResidualIsRhs) {
  Problem p = single_block(2, Matrix::Identity(2, 2));
  add_row(p, unit(2, 0, 0), 1.5);
  add_row(p, unit(2, 1, 1), -4.0);
  Solution s;
  s.primal = {Matrix::Zero(2, 2)};
  s.dual = Vector::Zero(2);
  EXPECT_DOUBLE_EQ(verify(p, s).primal_residual, 4.0);
}

TEST(Io, RoundTrip) {
  std::mt19937_64 rng(24);
  Problem p;
  p.block_dims = {2, 1};
  p.objective = {random_symmetric(rng, 2), Matrix::Constant(1, 1, 0.3)};
  p.constraints.push_back({{random_symmetric(rng, 2), Matrix::Identity(1, 1)}, 1.0 / 3.0});
  std::stringstream ss;
  write_problem(ss, p);
  EXPECT_EQ(ss.str().rfind("blocks: 2 1\n", 0), 0u);
  const Problem q = read_problem(ss);
  EXPECT_EQ(q.block_dims, p.block_dims);
  EXPECT_EQ(q.objective[0], p.objective[0]);
  EXPECT_EQ(q.constraints[0].coeffs[0], p.constraints[0].coeffs[0]);
  EXPECT_EQ(q.constraints[0].rhs, p.constraints[0].rhs);
}

TEST(Io, MalformedInputRaises) {
  std::stringstream bad("objective\n1\n");
  EXPECT_THROW(read_problem(bad), InvalidProblem);
  std::stringstream short_row("blocks: 2\nobjective\n1 0\n0\n");
  EXPECT_THROW(read_problem(short_row), InvalidProblem);
}

}  // namespace
}  // namespace coco::sdp

#include <array>
#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "coco/linalg.hpp"
#include "test_util.hpp"

namespace coco::linalg {
namespace {

using coco::testing::gaussian;
using coco::testing::random_pd;
using coco::testing::random_symmetric;
using coco::testing::random_with_norm;

TEST(SymEig, IdentityHasUnitSpectrumAndOrthonormalBasis) {
  const SymEig e = sym_eig(Matrix::Identity(2, 2));
  EXPECT_NEAR(e.values(0), 1.0, 1e-15);
  EXPECT_NEAR(e.values(1), 1.0, 1e-15);
  EXPECT_LT((e.vectors.transpose() * e.vectors - Matrix::Identity(2, 2)).norm(), 1e-14);
}

TEST(SymEig, DiagonalAscending) {
  SymMatrix S = Vector::Map(std::array{4.0, 1.0}.data(), 2).asDiagonal();
  const Vector v = sym_eig(S).values;
  EXPECT_DOUBLE_EQ(v(0), 1.0);
  EXPECT_DOUBLE_EQ(v(1), 4.0);
}

TEST(SymEig, TwoByTwoMatchesCharacteristicRoots) {
  SymMatrix S(2, 2);
  S << 2, 1, 1, 2;
  // Roots of l^2 - 4 l + 3.
  const Vector v = sym_eig(S).values;
  EXPECT_NEAR(v(0), 1.0, 1e-14);
  EXPECT_NEAR(v(1), 3.0, 1e-14);
}

TEST(SymEig, RejectsNonFiniteAndAsymmetric) {
  SymMatrix S = Matrix::Identity(2, 2);
  S(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(sym_eig(S), InvalidInput);
  SymMatrix T(2, 2);
  T << 1, 2, 0, 1;
  EXPECT_THROW(sym_eig(T), InvalidInput);
}

TEST(SymEig, RandomReconstruction) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 8;
    const SymMatrix S = random_symmetric(rng, n);
    const SymEig e = sym_eig(S);
    const Matrix rec = e.vectors * e.values.asDiagonal() * e.vectors.transpose();
    EXPECT_LE((rec - S).norm(), 1e-9 * (1.0 + S.norm())) << "n=" << n;
    EXPECT_LE((e.vectors.transpose() * e.vectors - Matrix::Identity(n, n)).norm(), 1e-10);
    for (int i = 1; i < n; ++i) {
      EXPECT_LE(e.values(i - 1), e.values(i));
    }
  }
}

TEST(SymEig, AgreesWithEigenSolver) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const SymMatrix S = random_symmetric(rng, 6);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(S);
    EXPECT_LE((sym_eigenvalues(S) - ref.eigenvalues()).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SymEig, Deterministic) {
  std::mt19937_64 rng(13);
  const SymMatrix S = random_symmetric(rng, 5);
  const SymEig a = sym_eig(S);
  const SymEig b = sym_eig(S);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.vectors, b.vectors);
}

TEST(PsdSqrt, KnownCases) {
  EXPECT_LT((psd_sqrt(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-14);
  SymMatrix D = Matrix::Zero(2, 2);
  D.diagonal() << 4, 9;
  SymMatrix H = Matrix::Zero(2, 2);
  H.diagonal() << 2, 3;
  EXPECT_LT((psd_sqrt(D) - H).norm(), 1e-14);
  SymMatrix S(2, 2);
  S << 2, 1, 1, 2;
  const SymMatrix R = psd_sqrt(S);
  EXPECT_LE((R * R - S).norm(), 1e-9);
}

TEST(PsdSqrt, ClampsTinyNegativeAndRejectsIndefinite) {
  SymMatrix S = Matrix::Zero(2, 2);
  S.diagonal() << 1.0, -1e-12;
  EXPECT_NO_THROW(psd_sqrt(S));
  S(1, 1) = -1e-6;
  EXPECT_THROW(psd_sqrt(S), NotPsd);
}

TEST(PsdSqrt, RoundTripOnRandomPsd) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 6;
    const SymMatrix H = psd_sqrt(random_pd(rng, n, 0.0));
    EXPECT_LE((psd_sqrt(H * H) - H).norm(), 1e-8 * (1.0 + H.norm()));
  }
}

TEST(PdInvSqrt, InvertsSqrt) {
  std::mt19937_64 rng(15);
  const SymMatrix S = random_pd(rng, 4, 0.5);
  const Matrix prod = pd_inv_sqrt(S) * psd_sqrt(S);
  EXPECT_LE((prod - Matrix::Identity(4, 4)).norm(), 1e-10);
  EXPECT_THROW(pd_inv_sqrt(Matrix::Zero(2, 2)), NotPd);
}

TEST(SpectralNorm, Examples) {
  EXPECT_NEAR(spectral_norm(Matrix::Identity(3, 3)), 1.0, 1e-15);
  Matrix D = Matrix::Zero(2, 2);
  D.diagonal() << 3, -5;
  EXPECT_NEAR(spectral_norm(D), 5.0, 1e-14);
  Matrix N(2, 2);
  N << 0, 2, 0, 0;
  EXPECT_NEAR(spectral_norm(N), 2.0, 1e-14);
  EXPECT_NEAR(min_singular_value(N), 0.0, 1e-14);
}

TEST(SpectralNorm, MatchesSvdAndSubmultiplicative) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix A = gaussian(rng, 3, 4);
    const Matrix B = gaussian(rng, 4, 2);
    Eigen::JacobiSVD<Matrix> svd(A);
    EXPECT_NEAR(spectral_norm(A), svd.singularValues()(0), 1e-10);
    EXPECT_LE(spectral_norm(A * B), spectral_norm(A) * spectral_norm(B) + 1e-12);
  }
}

TEST(ConditionNumber, Examples) {
  EXPECT_NEAR(condition_number(Matrix::Identity(2, 2)), 1.0, 1e-15);
  SymMatrix D = Matrix::Zero(2, 2);
  D.diagonal() << 1, 4;
  EXPECT_NEAR(condition_number(D), 4.0, 1e-14);
  EXPECT_NEAR(condition_number(2.0 * Matrix::Identity(2, 2)), 1.0, 1e-15);
  D(0, 0) = 0.0;
  EXPECT_THROW(condition_number(D), NotPd);
}

TEST(Cholesky, FactorsAndRejects) {
  std::mt19937_64 rng(17);
  const SymMatrix S = random_pd(rng, 5);
  const Matrix L = cholesky(S);
  EXPECT_LE((L * L.transpose() - S).norm(), 1e-10 * S.norm());
  EXPECT_EQ(L(0, 1), 0.0);
  SymMatrix bad(2, 2);
  bad << 1, 2, 2, 1;
  EXPECT_THROW(cholesky(bad), NotPd);
}

TEST(Lyapunov, ScalarGeometricSeries) {
  const Matrix m = Matrix::Constant(1, 1, 0.5);
  const SymMatrix c = Matrix::Constant(1, 1, 1.0);
  EXPECT_NEAR(lyapunov_discrete(m, c)(0, 0), 4.0 / 3.0, 1e-12);
  EXPECT_LT((lyapunov_discrete(Matrix::Zero(2, 2), Matrix::Identity(2, 2)) - Matrix::Identity(2, 2)).norm(),
            1e-15);
  Matrix M = Matrix::Zero(2, 2);
  M(0, 0) = 0.5;
  const SymMatrix X = lyapunov_discrete(M, Matrix::Identity(2, 2));
  EXPECT_NEAR(X(0, 0), 4.0 / 3.0, 1e-12);
  EXPECT_NEAR(X(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(X(0, 1), 0.0, 1e-15);
}

TEST(Lyapunov, ResidualOnRandomStableMatrices) {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> radius(0.05, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 5;
    const Matrix M = random_with_norm(rng, n, n, radius(rng));
    const SymMatrix C = random_pd(rng, n);
    const SymMatrix X = lyapunov_discrete(M, C);
    EXPECT_LE((X - M * X * M.transpose() - C).norm(), 1e-9 * (1.0 + X.norm())) << "trial " << trial;
  }
}

TEST(Lyapunov, UnstableRaises) {
  EXPECT_THROW(lyapunov_discrete(Matrix::Constant(1, 1, 1.01), Matrix::Identity(1, 1)), UnstableMatrix);
}

TEST(Helpers, BlockDiagAndSymmetrize) {
  const Matrix D = block_diag(Matrix::Identity(2, 2), 3.0 * Matrix::Identity(1, 1));
  EXPECT_EQ(D.rows(), 3);
  EXPECT_EQ(D(2, 2), 3.0);
  EXPECT_EQ(D(0, 2), 0.0);
  Matrix A(2, 2);
  A << 1, 2, 0, 1;
  const SymMatrix S = symmetrize(A);
  EXPECT_EQ(S(0, 1), 1.0);
  EXPECT_EQ(S(1, 0), 1.0);
  EXPECT_THROW(require_symmetric(A, "A"), InvalidInput);
}

TEST(Helpers, SpectralRadius) {
  Matrix J(2, 2);
  J << 0, 1, -1, 0;  // rotation, eigenvalues +-i
  EXPECT_NEAR(spectral_radius(J), 1.0, 1e-12);
}

}  // namespace
}  // namespace coco::linalg

#include "coco/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace coco::linalg {

namespace {

constexpr int kMaxJacobiSweeps = 64;

void require_finite(const Matrix& M, const char* what) {
  if (!all_finite(M)) {
    throw InvalidInput(std::string(what) + ": non-finite entry");
  }
}

// One-sided cyclic Jacobi on a symmetric working copy. Rotations are
// accumulated into V when requested.
void jacobi_in_place(Matrix& A, Matrix* V) {
  const Eigen::Index n = A.rows();
  if (V != nullptr) {
    V->setIdentity(n, n);
  }
  if (n == 1) {
    return;
  }
  const double scale = std::max(A.cwiseAbs().maxCoeff(), 1e-300);
  for (int sweep = 0; sweep < kMaxJacobiSweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        off += A(p, q) * A(p, q);
      }
    }
    if (std::sqrt(off) <= 1e-17 * scale * static_cast<double>(n)) {
      return;
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) {
          continue;
        }
        const double app = A(p, p);
        const double aqq = A(q, q);
        // Skip rotations that cannot change the diagonal in floating point.
        if (sweep > 3 && std::abs(apq) < 1e-18 * (std::abs(app) + std::abs(aqq))) {
          A(p, q) = 0.0;
          A(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p);
          const double akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k);
          const double aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        A(p, q) = 0.0;
        A(q, p) = 0.0;
        if (V != nullptr) {
          for (Eigen::Index k = 0; k < n; ++k) {
            const double vkp = (*V)(k, p);
            const double vkq = (*V)(k, q);
            (*V)(k, p) = c * vkp - s * vkq;
            (*V)(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
}

std::vector<Eigen::Index> ascending_order(const Vector& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  return order;
}

}  // namespace

bool all_finite(const Matrix& M) { return M.allFinite(); }

void require_symmetric(const Matrix& M, const char* what) {
  require_finite(M, what);
  if (M.rows() != M.cols() || M.rows() < 1) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << M.rows() << "x" << M.cols();
    throw InvalidInput(os.str());
  }
  const double max_abs = M.cwiseAbs().maxCoeff();
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * (1.0 + max_abs)) {
    std::ostringstream os;
    os << what << ": not symmetric (max asymmetry " << asym << ")";
    throw InvalidInput(os.str());
  }
}

SymMatrix symmetrize(const Matrix& M) { return 0.5 * (M + M.transpose()); }

SymEig sym_eig(const SymMatrix& S) {
  require_symmetric(S, "sym_eig");
  Matrix A = symmetrize(S);
  Matrix V;
  jacobi_in_place(A, &V);
  const Vector diag = A.diagonal();
  const auto order = ascending_order(diag);
  SymEig out{Vector(diag.size()), Matrix(V.rows(), V.cols())};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out.values(idx) = diag(order[i]);
    out.vectors.col(idx) = V.col(order[i]);
  }
  return out;
}

Vector sym_eigenvalues(const SymMatrix& S) {
  require_symmetric(S, "sym_eigenvalues");
  Matrix A = symmetrize(S);
  jacobi_in_place(A, nullptr);
  Vector diag = A.diagonal();
  std::sort(diag.data(), diag.data() + diag.size());
  return diag;
}

double min_eig(const SymMatrix& S) { return sym_eigenvalues(S)(0); }

double max_eig(const SymMatrix& S) {
  const Vector v = sym_eigenvalues(S);
  return v(v.size() - 1);
}

SymMatrix psd_sqrt(const SymMatrix& S) {
  const SymEig eig = sym_eig(S);
  const double top = std::max(1.0, eig.values(eig.values.size() - 1));
  Vector root(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    const double lam = eig.values(i);
    if (lam < -1e-10 * top) {
      std::ostringstream os;
      os << "psd_sqrt: eigenvalue " << lam << " is below the clamp threshold";
      throw NotPsd(os.str());
    }
    root(i) = std::sqrt(std::max(lam, 0.0));
  }
  return symmetrize(eig.vectors * root.asDiagonal() * eig.vectors.transpose());
}

SymMatrix pd_inv_sqrt(const SymMatrix& S) {
  const SymEig eig = sym_eig(S);
  if (!(eig.values(0) > 0.0)) {
    throw NotPd("pd_inv_sqrt: matrix is not positive definite");
  }
  const Vector inv_root = eig.values.cwiseSqrt().cwiseInverse();
  return symmetrize(eig.vectors * inv_root.asDiagonal() * eig.vectors.transpose());
}

double spectral_norm(const Matrix& M) {
  require_finite(M, "spectral_norm");
  if (M.size() == 0) {
    return 0.0;
  }
  const Matrix gram = M.rows() <= M.cols() ? Matrix(M * M.transpose())
                                           : Matrix(M.transpose() * M);
  return std::sqrt(std::max(max_eig(symmetrize(gram)), 0.0));
}

double min_singular_value(const Matrix& M) {
  require_finite(M, "min_singular_value");
  if (M.size() == 0) {
    return 0.0;
  }
  // Smallest singular value of the short side; a wide or tall matrix has a
  // null space on its long side that is not counted here.
  const Matrix gram = M.rows() <= M.cols() ? Matrix(M * M.transpose())
                                           : Matrix(M.transpose() * M);
  return std::sqrt(std::max(min_eig(symmetrize(gram)), 0.0));
}

double condition_number(const SymMatrix& S) {
  const Vector lam = sym_eigenvalues(S);
  const double lo = lam(0);
  const double hi = lam(lam.size() - 1);
  if (!(lo > 1e-300) || !(lo > 1e-15 * hi)) {
    throw NotPd("condition_number: matrix is singular or indefinite");
  }
  return hi / lo;
}

Matrix cholesky(const SymMatrix& S) {
  require_symmetric(S, "cholesky");
  Eigen::LLT<Matrix> llt(symmetrize(S));
  if (llt.info() != Eigen::Success) {
    throw NotPd("cholesky: matrix is not positive definite");
  }
  return llt.matrixL();
}

SymMatrix lyapunov_discrete(const Matrix& M, const SymMatrix& C) {
  require_finite(M, "lyapunov_discrete(M)");
  require_symmetric(C, "lyapunov_discrete(C)");
  if (M.rows() != M.cols() || M.rows() != C.rows()) {
    throw InvalidInput("lyapunov_discrete: dimension mismatch");
  }
  // X_{k+1} = X_k + A_k X_k A_k^T, A_{k+1} = A_k^2 sums 2^k terms of the
  // series sum_j M^j C M^jT per step.
  constexpr int kMaxDoublings = 60;
  Matrix X = symmetrize(C);
  Matrix A = M;
  const double c_norm = C.norm();
  for (int k = 0; k < kMaxDoublings; ++k) {
    const Matrix increment = A * X * A.transpose();
    X = symmetrize(X + increment);
    A = (A * A).eval();
    if (!X.allFinite() || !A.allFinite() || X.norm() > 1e200) {
      break;
    }
    if (increment.norm() <= 1e-17 * (1.0 + X.norm()) && A.norm() < 1e-8) {
      const double residual = (X - M * X * M.transpose() - C).norm();
      if (residual <= 1e-9 * (1.0 + c_norm)) {
        return X;
      }
    }
  }
  // Accept a converged sum even if A_k is not tiny yet (e.g. nilpotent parts).
  if (X.allFinite()) {
    const double residual = (X - M * X * M.transpose() - C).norm();
    if (residual <= 1e-9 * (1.0 + c_norm) && A.allFinite() && A.norm() < 1e-6) {
      return X;
    }
  }
  throw UnstableMatrix("lyapunov_discrete: iteration did not converge (spectral radius >= 1?)");
}

Matrix block_diag(const Matrix& A, const Matrix& B) {
  Matrix out = Matrix::Zero(A.rows() + B.rows(), A.cols() + B.cols());
  out.topLeftCorner(A.rows(), A.cols()) = A;
  out.bottomRightCorner(B.rows(), B.cols()) = B;
  return out;
}

double spectral_radius(const Matrix& M) {
  const Eigen::EigenSolver<Matrix> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace coco::linalg

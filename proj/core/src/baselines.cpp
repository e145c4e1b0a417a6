#include "coco/baselines.hpp"

#include <cmath>
#include <sstream>

#include "coco/linalg.hpp"

namespace coco::baselines {

namespace {

constexpr double kDivergenceNorm = 1e15;

void check(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() || R.rows() != B.cols()) {
    throw InvalidInput("riccati: dimension mismatch");
  }
  linalg::require_symmetric(Q, "Q");
  linalg::require_symmetric(R, "R");
  if (!A.allFinite() || !B.allFinite()) {
    throw InvalidInput("riccati: A and B must be finite");
  }
}

// One backward Riccati step in Joseph form, which keeps P symmetric PSD.
SymMatrix backward(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R, const SymMatrix& P,
                   Matrix& K) {
  K = riccati_gain(A, B, R, P);
  const Matrix Acl = A + B * K;
  return linalg::symmetrize(Q + K.transpose() * R * K + Acl.transpose() * P * Acl);
}

}  // namespace

Matrix riccati_gain(const Matrix& A, const Matrix& B, const SymMatrix& R, const SymMatrix& P) {
  const SymMatrix S = linalg::symmetrize(R + B.transpose() * P * B);
  const Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw NotPd("riccati: R + B^T P B is not positive definite");
  }
  return -llt.solve(B.transpose() * P * A);
}

double dare_residual(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R, const SymMatrix& P) {
  const Matrix PB = P * B;
  const Matrix S = R + B.transpose() * PB;
  const Matrix rhs = Q + A.transpose() * P * A - A.transpose() * PB * S.ldlt().solve(PB.transpose() * A);
  return (P - rhs).norm();
}

RiccatiResult dare(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R,
                   const DareOptions& options) {
  check(A, B, Q, R);
  if (!(options.damping > 0.0 && options.damping <= 1.0) || options.max_iter < 1) {
    throw InvalidInput("dare: damping must lie in (0, 1] and max_iter >= 1");
  }
  RiccatiResult out;
  SymMatrix P = linalg::symmetrize(Q);
  Matrix K;
  for (int k = 1; k <= options.max_iter; ++k) {
    const SymMatrix next = backward(A, B, Q, R, P, K);
    const SymMatrix damped = (1.0 - options.damping) * P + options.damping * next;
    const double change = (damped - P).norm();
    const double scale = 1.0 + P.norm();
    P = damped;
    if (!P.allFinite() || P.norm() > kDivergenceNorm) {
      std::ostringstream os;
      os << "dare: iteration diverged after " << k << " steps";
      throw NotStabilizable(os.str());
    }
    if (change <= options.tol * scale) {
      out.P = P;
      out.K = riccati_gain(A, B, R, P);
      out.iterations = k;
      return out;
    }
  }
  std::ostringstream os;
  os << "dare: no convergence within " << options.max_iter << " iterations";
  throw NotStabilizable(os.str());
}

Matrix naive_lti_step(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R) {
  return dare(A, B, Q, R).K;
}

std::vector<Matrix> offline_optimal(const std::vector<Dynamics>& sequence, const SymMatrix& Q, const SymMatrix& R) {
  std::vector<Matrix> gains(sequence.size());
  SymMatrix P = linalg::symmetrize(Q);
  for (std::size_t i = sequence.size(); i-- > 0;) {
    const auto& s = sequence[i];
    check(s.A, s.B, Q, R);
    P = backward(s.A, s.B, Q, R, P, gains[i]);
  }
  return gains;
}

std::vector<Matrix> h_horizon_step(const std::vector<Dynamics>& window, const SymMatrix& Q, const SymMatrix& R) {
  if (window.empty()) {
    throw InvalidInput("h_horizon_step: empty window");
  }
  return offline_optimal(window, Q, R);
}

}  // namespace coco::baselines

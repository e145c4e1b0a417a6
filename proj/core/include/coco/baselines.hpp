#pragma once

#include <vector>

#include "coco/types.hpp"

namespace coco::baselines {

struct RiccatiResult {
  SymMatrix P;  // value matrix
  Matrix K;     // u = K x
  int iterations = 0;
};

struct DareOptions {
  double damping = 1.0;  // P <- (1 - damping) P + damping * Ric(P)
  double tol = 1e-12;    // on ||P_{k+1} - P_k||_F / (1 + ||P_k||_F)
  int max_iter = 100000;
};

/// Discrete algebraic Riccati equation by damped fixed-point iteration from
/// P = Q. Raises NotStabilizable when the iteration diverges or hits the cap.
RiccatiResult dare(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R,
                   const DareOptions& options = {});

/// Frobenius residual of the Riccati equation at P.
double dare_residual(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R, const SymMatrix& P);

/// -(R + B^T P B)^-1 B^T P A.
Matrix riccati_gain(const Matrix& A, const Matrix& B, const SymMatrix& R, const SymMatrix& P);

/// Infinite-horizon LQR gain for the current (A_t, B_t), ignoring the future.
Matrix naive_lti_step(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R);

/// Backward recursion over a known sequence with terminal value Q; returns the
/// gains in forward order.
std::vector<Matrix> offline_optimal(const std::vector<Dynamics>& sequence, const SymMatrix& Q, const SymMatrix& R);

/// Finite-horizon optimal gains over a window of H known steps with terminal
/// cost Q (forward order). The caller decides whether all H are committed or
/// only the first one is used before replanning.
std::vector<Matrix> h_horizon_step(const std::vector<Dynamics>& window, const SymMatrix& Q, const SymMatrix& R);

}  // namespace coco::baselines

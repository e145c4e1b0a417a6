#pragma once

#include "coco/types.hpp"

namespace coco::linalg {

struct SymEig {
  Vector values;   // ascending
  Matrix vectors;  // columns are orthonormal eigenvectors
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Input must be finite and symmetric to within 1e-12 * (1 + max|S|); the
/// strictly upper and lower triangles are averaged before rotating. Ties in
/// the eigenvalue ordering keep the Jacobi column order, so results are
/// deterministic.
SymEig sym_eig(const SymMatrix& S);

/// Eigenvalues only (same algorithm, skips accumulating rotations).
Vector sym_eigenvalues(const SymMatrix& S);

double min_eig(const SymMatrix& S);
double max_eig(const SymMatrix& S);

/// Symmetric PSD square root. Eigenvalues in [-1e-10 * max(1, lambda_max), 0)
/// are clamped to zero; anything more negative raises NotPsd.
SymMatrix psd_sqrt(const SymMatrix& S);

/// Inverse square root of a positive definite matrix.
SymMatrix pd_inv_sqrt(const SymMatrix& S);

/// Largest singular value.
double spectral_norm(const Matrix& M);

/// Smallest singular value over min(rows, cols) values.
double min_singular_value(const Matrix& M);

/// lambda_max / lambda_min of a positive definite matrix.
double condition_number(const SymMatrix& S);

/// Lower Cholesky factor; raises NotPd.
Matrix cholesky(const SymMatrix& S);

/// Solves X = M X M^T + C by squared Smith iteration. Raises UnstableMatrix
/// if the doubling sequence does not converge.
SymMatrix lyapunov_discrete(const Matrix& M, const SymMatrix& C);

// Helpers shared across modules.

bool all_finite(const Matrix& M);

/// Throws InvalidInput when M is non-finite, non-square or asymmetric beyond
/// 1e-12 * (1 + max|M|). `what` names the argument in the message.
void require_symmetric(const Matrix& M, const char* what);

SymMatrix symmetrize(const Matrix& M);

/// Block-diagonal matrix diag(A, B).
Matrix block_diag(const Matrix& A, const Matrix& B);

/// Spectral radius (largest eigenvalue modulus). Diagnostics only.
double spectral_radius(const Matrix& M);

}  // namespace coco::linalg

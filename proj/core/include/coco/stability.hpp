#pragma once

#include <iosfwd>
#include <vector>

#include "coco/types.hpp"

namespace coco::stability {

struct Theorem1Params {
  double kappa = 0.0;  // kappa_W / sqrt(1 - alpha)
  double gamma = 0.0;  // 1 - sqrt(alpha)
  double rho = 0.0;    // sqrt(alpha / (1 - alpha))
};

/// Raises OutOfRange for alpha outside [0, 0.5).
Theorem1Params theorem1_params(double alpha, const SymMatrix& W);

struct Decomposition {
  SymMatrix H;  // Sigma_xx^{1/2}
  Matrix L;     // H^-1 (A + B K) H
};

Decomposition decompose(const Matrix& A, const Matrix& B, const Matrix& K, const SymMatrix& sigma_xx);

struct StepInput {
  Matrix A;
  Matrix B;
  Matrix K;
  SymMatrix sigma_xx;
};

struct StepRecord {
  int t = 0;
  double norm_L = 0.0;
  double norm_H = 0.0;
  double norm_Hinv = 0.0;
  double kappa_t = 0.0;          // norm_H * norm_Hinv
  double transition_norm = 0.0;  // ||H_{t+1}^-1 H_t||; NaN on the last step
  double reconstruction = 0.0;   // ||H L H^-1 - (A + B K)||_F
  bool pass = false;
};

struct Certificate {
  std::vector<StepRecord> steps;
  double sqrt_alpha = 0.0;
  double kappa = 0.0;           // kappa_W / sqrt(1 - alpha)
  double transition_cap = 0.0;  // 1 / sqrt(1 - alpha)
  double tolerance = 1e-7;

  double max_norm_L = 0.0;
  double max_kappa_t = 0.0;
  double max_transition = 0.0;
  std::vector<int> failing;  // step indices t with a failed check
  bool pass = false;

  // Threshold minus worst value; negative when the check fails.
  double margin_L() const { return sqrt_alpha + tolerance - max_norm_L; }
  double margin_kappa() const { return kappa + tolerance - max_kappa_t; }
  double margin_transition() const { return transition_cap + tolerance - max_transition; }
};

/// Checks the per-step similarity bounds and the basis-transition bound over a
/// sequence. Reports failures instead of throwing. `t0` labels the first step.
Certificate certify_sequence(const std::vector<StepInput>& steps, double alpha, const SymMatrix& W, int t0 = 0);

/// CSV rows `t,norm_L,kappa_t,transition_norm,pass`.
void write_certificate_csv(std::ostream& os, const Certificate& cert);

struct IssEnvelope {
  int t0 = 0;
  double kappa = 1.0;
  double rho = 0.0;
  double noise_sup = 0.0;
  double x_t0_norm = 0.0;

  /// kappa rho^(t - t0) ||x_t0|| + kappa rho / (1 - rho) noise_sup.
  double bound(int t) const;
};

struct AuditResult {
  int violations = 0;
  double max_ratio = 0.0;  // max_t ||x_t|| / bound(t)
  int checked = 0;
};

/// Counts t >= t0 with ||x_t|| > bound(t) (1 + 1e-9). `states[t]` is x_t.
/// Raises InvalidInput when noise_sup is not finite.
AuditResult iss_audit(const std::vector<Vector>& states, const IssEnvelope& envelope);

struct Theorem2Envelope {
  double kappa_A = 0.0;        // 1 + a + ... + a^(H-1)
  double kappa_A_prime = 0.0;  // a^(H-1) + b^2 kappa_A^2 kappa_R (kappa + a^H) / sigma
  double kappa = 0.0;
  double rho = 0.0;
  int horizon = 1;

  /// kappa_A' rho^(t/H - 1) ||x_1|| + kappa_A' kappa_A kappa max(1, rho/(1-rho)) w_sup,
  /// with t counted from 1.
  double bound(int t, double x1_norm, double w_sup) const;
};

Theorem2Envelope theorem2_envelope(double alpha, const SymMatrix& W, double a, double b, int H, double sigma,
                                   double kappa_R);

}  // namespace coco::stability

#pragma once

#include <optional>
#include <vector>

#include "coco/sdp.hpp"
#include "coco/types.hpp"

namespace coco::control {

struct Cost {
  SymMatrix Q;
  SymMatrix R;
  SymMatrix W;  // disturbance covariance
};

/// On an infeasible step, retry with alpha <- min(max_alpha, alpha*growth + (1-growth)).
struct RelaxAlpha {
  double max_alpha = 0.95;
  double growth = 0.5;
};

struct CocoConfig {
  double alpha = 0.4;
  std::optional<RelaxAlpha> fallback;
  sdp::Settings solver;

  /// The sequential-stability guarantee only covers alpha < 1/2.
  bool guaranteed() const { return alpha < 0.5; }
};

enum class StepStatus { Ok, InfeasibleAtAlpha, SolverFailure };

const char* to_string(StepStatus s);

struct PolicyStep {
  Matrix K;           // p x d, u = K x
  SymMatrix sigma_xx;
  Matrix sigma_xu;
  SymMatrix sigma_uu;
  double alpha_used = 0.0;
  StepStatus status = StepStatus::SolverFailure;

  double realizability_residual = 0.0;  // ||S_uu - K S_xx K^T||_F
  double slack_min_eig = 0.0;           // lambda_min(W/(1-alpha) - S_xx)
  int attempts = 0;                     // SDP solves including fallback retries
  sdp::Status sdp_status = sdp::Status::MaxIterations;
  sdp::Metrics metrics;
};

/// Step SDP over Sigma (d+p) and the slack T = W/(1-alpha) - Sigma_xx (d):
/// d(d+1)/2 stationarity rows followed by d(d+1)/2 slack-link rows.
sdp::Problem build_coco_sdp(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R,
                            const SymMatrix& W, double alpha);

/// Same program without the covariance constraint (single Sigma block). Its
/// optimum recovers the infinite-horizon LQR gain.
sdp::Problem build_lqr_sdp(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R,
                           const SymMatrix& W);

/// Gain K = Sigma_xu^T Sigma_xx^-1 from the (d+p) covariance block. Raises
/// ExtractionError when lambda_min(Sigma_xx) < 1e-12. `status` is Ok only if
/// the realizability residual is within 1e-5 * (1 + ||Sigma_uu||_F).
PolicyStep extract_gain(const SymMatrix& sigma, int d);

/// Sigma_0 = [I; -B^+ A] W [I; -B^+ A]^T with B^+ = B^T (B B^T)^-1. Raises
/// NotFullRowRank when B B^T is singular.
SymMatrix build_feasible_point(const Matrix& A, const Matrix& B, const SymMatrix& W);

/// Solves one step. The SDP is solved on a rescaled copy (unit ||W||, unit
/// ||B||, unit cost scale, input shifted by the part of A that B can cancel)
/// and mapped back, so tolerances are relative.
PolicyStep coco_step(const Matrix& A, const Matrix& B, const Cost& cost, const CocoConfig& config);

struct LiftedSystem {
  Matrix A_tilde;      // A_{t+H-1} ... A_t
  Matrix B_tilde;      // [B_{t+H-1}, A_{t+H-1} B_{t+H-2}, ..., A_{t+H-1}..A_{t+1} B_t]
  SymMatrix R_tilde;   // H copies of R on the diagonal
  SymMatrix W_tilde;   // covariance of the accumulated disturbance
  int horizon = 1;
  double sigma = 0.0;  // lambda_min(B_tilde B_tilde^T)
};

/// Raises InvalidInput on an empty window or inconsistent shapes.
LiftedSystem lift(const std::vector<Dynamics>& window, const SymMatrix& R, const SymMatrix& W);

struct PredictStep {
  PolicyStep policy;  // gain over the lifted system, (H p) x d
  LiftedSystem lifted;
  int p = 0;

  /// Control planned for u_{t+offset} from the block-start state x_t.
  Vector planned_control(const Vector& x_block_start, int offset) const;
};

/// Lifts `window` and solves the lifted step. Raises InfeasibleLift when the
/// lifted input matrix is row-rank deficient (sigma < 1e-12 ||B_tilde||^2).
PredictStep coco_predict_step(const std::vector<Dynamics>& window, const Cost& cost, const CocoConfig& config);

struct EstimationTolerance {
  double alpha = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
  double rho = 0.0;
  double k_max = 0.0;
  double delta_max = 0.0;

  /// Largest admissible model error for a given delta in [0, delta_max).
  double rhs(double delta) const;
  /// Contraction rate of the perturbed closed loop for a given delta.
  double rho_prime(double delta) const;
};

/// Raises OutOfRange for alpha outside [0, 0.5) or K_max <= 0.
EstimationTolerance estimation_tolerance(double alpha, const SymMatrix& W, double k_max);

/// kappa_R (sigmaB_bar / sigmaB_lower^2) (kappa (1 - gamma) + sigmaA_bar).
double k_max_bound(double alpha, const SymMatrix& W, const SymMatrix& R, double sigmaA_bar, double sigmaB_bar,
                   double sigmaB_lower);

}  // namespace coco::control

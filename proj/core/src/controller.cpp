#include "coco/controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "coco/linalg.hpp"

namespace coco::control {

namespace {

void require_pd(const SymMatrix& M, const char* what) {
  linalg::require_symmetric(M, what);
  Eigen::LLT<Matrix> llt(linalg::symmetrize(M));
  if (llt.info() != Eigen::Success) {
    throw InvalidInput(std::string(what) + " must be positive definite");
  }
}

void check_shapes(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R, const SymMatrix& W) {
  const auto d = A.rows();
  if (A.cols() != d || B.rows() != d || B.cols() < 1 || Q.rows() != d || W.rows() != d ||
      R.rows() != B.cols()) {
    std::ostringstream os;
    os << "dimension mismatch: A " << A.rows() << "x" << A.cols() << ", B " << B.rows() << "x" << B.cols()
       << ", Q " << Q.rows() << ", R " << R.rows() << ", W " << W.rows();
    throw InvalidInput(os.str());
  }
  if (!A.allFinite() || !B.allFinite()) {
    throw InvalidInput("A and B must be finite");
  }
  require_pd(Q, "Q");
  require_pd(R, "R");
  require_pd(W, "W");
}

void require_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    std::ostringstream os;
    os << "alpha must lie in [0, 1), got " << alpha;
    throw InvalidInput(os.str());
  }
}

Matrix unit_sym(int d, int i, int j) {
  Matrix E = Matrix::Zero(d, d);
  E(i, j) += 0.5;
  E(j, i) += 0.5;
  return E;
}

// Stationarity rows <P_x^T E P_x - G^T E G, Sigma> = W_ij with G = [A B].
std::vector<sdp::ConstraintRow> stationarity_rows(const Matrix& A, const Matrix& B, const SymMatrix& W,
                                                   bool with_slack) {
  const int d = static_cast<int>(A.rows());
  const int n = d + static_cast<int>(B.cols());
  Matrix G(d, n);
  G << A, B;
  std::vector<sdp::ConstraintRow> rows;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const Matrix E = unit_sym(d, i, j);
      Matrix coeff = -G.transpose() * E * G;
      coeff.topLeftCorner(d, d) += E;
      sdp::ConstraintRow row;
      row.coeffs.push_back(linalg::symmetrize(coeff));
      if (with_slack) {
        row.coeffs.push_back(Matrix::Zero(d, d));
      }
      row.rhs = W(i, j);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

Matrix input_scaling(const Matrix& B) {
  const Eigen::JacobiSVD<Matrix> svd(B, Eigen::ComputeFullV);
  const auto p = B.cols();
  const Vector& s = svd.singularValues();
  const double top = s.size() > 0 ? s(0) : 0.0;
  if (!(top > 0.0)) {
    return Matrix::Identity(p, p);
  }
  Vector t = Vector::Constant(p, 1.0 / top);
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > 1e-8 * top) {
      t(i) = 1.0 / s(i);
    }
  }
  return svd.matrixV() * t.asDiagonal() * svd.matrixV().transpose();
}

double inv_sqrt_one_minus(double alpha) { return 1.0 / std::sqrt(1.0 - alpha); }

struct StepSolve {
  sdp::Status status = sdp::Status::MaxIterations;
  sdp::Metrics metrics;
  SymMatrix sigma;
  SymMatrix slack;
  Matrix dual_gain;  // -S_uu^-1 S_ux from the Sigma block's dual slack; empty if unavailable
};

// At alpha = 0 the slack is forced to zero and every feasible Sigma lives on
// the face {Sigma = N Z N^T} with N spanning null([A B]); the full program has
// no interior there, so it is solved over Z instead.
StepSolve solve_on_null_face(const Matrix& A, const Matrix& B, const SymMatrix& C, const SymMatrix& W,
                             const sdp::Settings& settings) {
  const int d = static_cast<int>(A.rows());
  const int n = d + static_cast<int>(B.cols());
  Matrix G(d, n);
  G << A, B;
  const Eigen::JacobiSVD<Matrix> svd(G, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    rank += s(i) > 1e-12 * std::max(1.0, s(0)) ? 1 : 0;
  }
  StepSolve out;
  const int k = n - rank;
  if (k == 0) {
    out.status = sdp::Status::PrimalInfeasible;
    return out;
  }
  const Matrix N = svd.matrixV().rightCols(k);
  const Matrix Nx = N.topRows(d);
  sdp::Problem face;
  face.block_dims = {k};
  face.objective = {linalg::symmetrize(N.transpose() * C * N)};
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      face.constraints.push_back({{linalg::symmetrize(Nx.transpose() * unit_sym(d, i, j) * Nx)}, W(i, j)});
    }
  }
  face.settings = settings;
  const sdp::Solution sol = sdp::solve(face);
  out.status = sol.status;
  out.metrics = sol.metrics;
  if (sol.status == sdp::Status::Optimal) {
    out.sigma = linalg::symmetrize(N * sol.primal[0] * N.transpose());
    out.slack = Matrix::Zero(d, d);
  }
  return out;
}

// C is the full (d+p) x (d+p) stage cost, which may couple x and u.
StepSolve solve_scaled(const Matrix& A, const Matrix& B, const SymMatrix& C, const SymMatrix& W, double alpha,
                       const sdp::Settings& settings) {
  const int d = static_cast<int>(A.rows());
  const auto p = B.cols();
  if (alpha == 0.0) {
    return solve_on_null_face(A, B, C, W, settings);
  }
  sdp::Problem problem =
      build_coco_sdp(A, B, C.topLeftCorner(d, d), C.bottomRightCorner(p, p), W, alpha);
  problem.objective[0] = C;
  problem.settings = settings;
  const sdp::Solution sol = sdp::solve(problem);
  StepSolve out;
  out.status = sol.status;
  out.metrics = sol.metrics;
  if (sol.status == sdp::Status::Optimal) {
    out.sigma = sol.primal[0];
    out.slack = sol.primal[1];
    // Complementarity Sigma S = 0 with Sigma = [I; K] Sigma_xx [I; K]^T gives
    // S_ux + S_uu K = 0. The dual converges faster than the primal factor
    // near the optimum, so the gain is read from S when S_uu is safely PD.
    const SymMatrix& S = sol.dual_slack[0];
    const SymMatrix S_uu = linalg::symmetrize(S.bottomRightCorner(p, p));
    const Eigen::LLT<Matrix> llt(S_uu);
    if (llt.info() == Eigen::Success && linalg::min_eig(S_uu) > 1e-8 * std::max(1.0, S.cwiseAbs().maxCoeff())) {
      out.dual_gain = -llt.solve(Matrix(S.bottomLeftCorner(p, d)));
    }
  }
  return out;
}

}  // namespace

const char* to_string(StepStatus s) {
  switch (s) {
    case StepStatus::Ok: return "ok";
    case StepStatus::InfeasibleAtAlpha: return "infeasible";
    case StepStatus::SolverFailure: return "failed";
  }
  return "unknown";
}

sdp::Problem build_coco_sdp(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R,
                            const SymMatrix& W, double alpha) {
  check_shapes(A, B, Q, R, W);
  require_alpha(alpha);
  const int d = static_cast<int>(A.rows());
  const int n = d + static_cast<int>(B.cols());

  sdp::Problem problem;
  problem.block_dims = {n, d};
  problem.objective = {linalg::block_diag(Q, R), Matrix::Zero(d, d)};
  problem.constraints = stationarity_rows(A, B, W, true);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const Matrix E = unit_sym(d, i, j);
      Matrix sigma_coeff = Matrix::Zero(n, n);
      sigma_coeff.topLeftCorner(d, d) = E;
      problem.constraints.push_back({{sigma_coeff, E}, W(i, j) / (1.0 - alpha)});
    }
  }
  return problem;
}

sdp::Problem build_lqr_sdp(const Matrix& A, const Matrix& B, const SymMatrix& Q, const SymMatrix& R,
                           const SymMatrix& W) {
  check_shapes(A, B, Q, R, W);
  sdp::Problem problem;
  problem.block_dims = {static_cast<int>(A.rows() + B.cols())};
  problem.objective = {linalg::block_diag(Q, R)};
  problem.constraints = stationarity_rows(A, B, W, false);
  return problem;
}

PolicyStep extract_gain(const SymMatrix& sigma, int d) {
  if (d < 1 || sigma.rows() <= d || sigma.cols() != sigma.rows()) {
    throw InvalidInput("extract_gain: sigma must be (d+p)x(d+p) with p >= 1");
  }
  linalg::require_symmetric(sigma, "extract_gain");
  const auto p = sigma.rows() - d;
  PolicyStep step;
  step.sigma_xx = linalg::symmetrize(sigma.topLeftCorner(d, d));
  step.sigma_xu = sigma.topRightCorner(d, p);
  step.sigma_uu = linalg::symmetrize(sigma.bottomRightCorner(p, p));
  const double lo = linalg::min_eig(step.sigma_xx);
  if (lo < 1e-12) {
    std::ostringstream os;
    os << "extract_gain: Sigma_xx is numerically singular (lambda_min = " << lo << ")";
    throw ExtractionError(os.str());
  }
  const Eigen::LLT<Matrix> llt(step.sigma_xx);
  step.K = llt.solve(step.sigma_xu).transpose();
  step.realizability_residual = (step.sigma_uu - step.K * step.sigma_xx * step.K.transpose()).norm();
  step.status = step.realizability_residual <= 1e-5 * (1.0 + step.sigma_uu.norm()) ? StepStatus::Ok
                                                                                    : StepStatus::SolverFailure;
  return step;
}

SymMatrix build_feasible_point(const Matrix& A, const Matrix& B, const SymMatrix& W) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || W.rows() != A.rows()) {
    throw InvalidInput("build_feasible_point: dimension mismatch");
  }
  linalg::require_symmetric(W, "W");
  const Matrix BBt = B * B.transpose();
  const double scale = std::max(1.0, BBt.cwiseAbs().maxCoeff());
  if (linalg::min_eig(linalg::symmetrize(BBt)) <= 1e-12 * scale) {
    throw NotFullRowRank("build_feasible_point: B B^T is singular");
  }
  const auto d = A.rows();
  const auto p = B.cols();
  const Eigen::LLT<Matrix> llt(linalg::symmetrize(BBt));
  Matrix F(d + p, d);
  F.topRows(d) = Matrix::Identity(d, d);
  F.bottomRows(p) = -B.transpose() * llt.solve(A);
  return linalg::symmetrize(F * W * F.transpose());
}

PolicyStep coco_step(const Matrix& A, const Matrix& B, const Cost& cost, const CocoConfig& config) {
  check_shapes(A, B, cost.Q, cost.R, cost.W);
  require_alpha(config.alpha);
  if (config.fallback) {
    const auto& f = *config.fallback;
    if (!(f.max_alpha >= 0.0 && f.max_alpha < 1.0) || !(f.growth >= 0.0 && f.growth < 1.0)) {
      throw InvalidInput("fallback: max_alpha and growth must lie in [0, 1)");
    }
  }
  const int d = static_cast<int>(A.rows());

  const double w_scale = linalg::spectral_norm(cost.W);
  // Input change of variables u = T (v - F x). T = V diag(1/s_i) V^T from the
  // SVD of B gives the scaled input matrix unit singular values on its range.
  // F = (B T)^+ A removes the part of A that B can cancel, so the scaled
  // stationarity rows see A - B T F instead of products of ||A||^2 size.
  const Matrix T = input_scaling(B);
  const Matrix Bn = B * T;
  Eigen::JacobiSVD<Matrix> bsvd(Bn, Eigen::ComputeThinU | Eigen::ComputeThinV);
  bsvd.setThreshold(1e-8);
  const Matrix F = bsvd.solve(A);
  const Matrix An = A - Bn * F;
  const auto p = B.cols();
  Matrix L = Matrix::Identity(d + p, d + p);
  L.bottomLeftCorner(p, d) = -F;
  SymMatrix Cn = linalg::symmetrize(L.transpose() *
                                    linalg::block_diag(cost.Q, linalg::symmetrize(T.transpose() * cost.R * T)) * L);
  Cn /= linalg::spectral_norm(Cn);
  const SymMatrix Wn = cost.W / w_scale;

  sdp::Settings settings = config.solver;
  settings.presolve = sdp::PresolveMode::Drop;

  double alpha = config.alpha;
  PolicyStep step;
  for (int attempt = 1;; ++attempt) {
    const StepSolve sol = solve_scaled(An, Bn, Cn, Wn, alpha, settings);

    const bool solved = sol.status == sdp::Status::Optimal;
    const bool retryable = sol.status == sdp::Status::PrimalInfeasible || sol.status == sdp::Status::MaxIterations;
    if (solved) {
      // Undo the scalings: Sigma = w D Sigma_n D^T with D = diag(I, T) L.
      const Matrix D = linalg::block_diag(Matrix::Identity(d, d), T) * L;
      const SymMatrix sigma = linalg::symmetrize(w_scale * D * sol.sigma * D.transpose());
      try {
        step = extract_gain(sigma, d);
        // With the covariance constraint active, the certificate needs K
        // consistent with the primal Sigma_xx. When slack, the dual gain is the
        // more accurate Riccati gain.
        const bool slack = sol.slack.size() > 0 && linalg::min_eig(sol.slack) > 1e-6;
        if (slack && step.status == StepStatus::Ok && sol.dual_gain.size() > 0) {
          step.K = T * (sol.dual_gain - F);
        }
      } catch (const ExtractionError&) {
        step = PolicyStep{};
        step.status = StepStatus::SolverFailure;
      }
      step.slack_min_eig = w_scale * linalg::min_eig(sol.slack);
    } else {
      step = PolicyStep{};
      step.status = retryable ? StepStatus::InfeasibleAtAlpha : StepStatus::SolverFailure;
    }
    step.alpha_used = alpha;
    step.attempts = attempt;
    step.sdp_status = sol.status;
    step.metrics = sol.metrics;
    if (solved || !retryable || !config.fallback || alpha >= config.fallback->max_alpha) {
      if (!solved && retryable && sol.status == sdp::Status::MaxIterations) {
        step.status = StepStatus::SolverFailure;
      }
      return step;
    }
    const auto& f = *config.fallback;
    alpha = std::min(f.max_alpha, alpha * f.growth + (1.0 - f.growth));
  }
}

LiftedSystem lift(const std::vector<Dynamics>& window, const SymMatrix& R, const SymMatrix& W) {
  if (window.empty()) {
    throw InvalidInput("lift: empty window");
  }
  const auto d = window.front().A.rows();
  const auto p = window.front().B.cols();
  for (const auto& s : window) {
    if (s.A.rows() != d || s.A.cols() != d || s.B.rows() != d || s.B.cols() != p) {
      throw InvalidInput("lift: inconsistent dimensions in window");
    }
  }
  if (R.rows() != p || R.cols() != p || W.rows() != d || W.cols() != d) {
    throw InvalidInput("lift: R or W has the wrong size");
  }
  const int H = static_cast<int>(window.size());
  LiftedSystem out;
  out.horizon = H;
  out.B_tilde.resize(d, H * p);
  out.R_tilde = Matrix::Zero(H * p, H * p);
  out.W_tilde = Matrix::Zero(d, d);
  // phi = A_{t+H-1} ... A_{s+1}, built from the end of the window backwards.
  Matrix phi = Matrix::Identity(d, d);
  for (int j = 0; j < H; ++j) {
    const int s = H - 1 - j;
    out.B_tilde.middleCols(j * p, p) = phi * window[static_cast<std::size_t>(s)].B;
    out.R_tilde.block(j * p, j * p, p, p) = R;
    out.W_tilde += phi * W * phi.transpose();
    phi = (phi * window[static_cast<std::size_t>(s)].A).eval();
  }
  out.A_tilde = phi;
  out.W_tilde = linalg::symmetrize(out.W_tilde);
  out.sigma = linalg::min_eig(linalg::symmetrize(out.B_tilde * out.B_tilde.transpose()));
  return out;
}

Vector PredictStep::planned_control(const Vector& x_block_start, int offset) const {
  if (offset < 0 || offset >= lifted.horizon) {
    throw InvalidInput("planned_control: offset outside the prediction block");
  }
  const Vector u_bar = policy.K * x_block_start;
  return u_bar.segment((lifted.horizon - 1 - offset) * p, p);
}

PredictStep coco_predict_step(const std::vector<Dynamics>& window, const Cost& cost, const CocoConfig& config) {
  PredictStep out;
  out.lifted = lift(window, cost.R, cost.W);
  out.p = static_cast<int>(window.front().B.cols());
  const double b_norm = linalg::spectral_norm(out.lifted.B_tilde);
  if (!(out.lifted.sigma >= 1e-12 * b_norm * b_norm) || b_norm == 0.0) {
    std::ostringstream os;
    os << "lifted input matrix is row-rank deficient at H=" << out.lifted.horizon
       << " (sigma=" << out.lifted.sigma << "); try a longer prediction horizon";
    throw InfeasibleLift(os.str());
  }
  const Cost lifted_cost{cost.Q, out.lifted.R_tilde, out.lifted.W_tilde};
  out.policy = coco_step(out.lifted.A_tilde, out.lifted.B_tilde, lifted_cost, config);
  return out;
}

double EstimationTolerance::rhs(double delta) const {
  if (!(delta >= 0.0 && delta < delta_max)) {
    throw OutOfRange("estimation tolerance: delta must lie in [0, delta_max)");
  }
  return delta * gamma / (kappa * (1.0 + k_max));
}

double EstimationTolerance::rho_prime(double delta) const {
  if (!(delta >= 0.0 && delta < delta_max)) {
    throw OutOfRange("estimation tolerance: delta must lie in [0, delta_max)");
  }
  // (1 - (1-delta) gamma) / (1 - gamma) * rho with 1 - gamma = sqrt(alpha),
  // written so that alpha = 0 is well defined.
  return (delta + (1.0 - delta) * std::sqrt(alpha)) * inv_sqrt_one_minus(alpha);
}

EstimationTolerance estimation_tolerance(double alpha, const SymMatrix& W, double k_max) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    throw OutOfRange("estimation tolerance requires alpha in [0, 0.5)");
  }
  if (!(k_max > 0.0)) {
    throw OutOfRange("estimation tolerance requires K_max > 0");
  }
  EstimationTolerance t;
  t.alpha = alpha;
  t.kappa = linalg::condition_number(W) * inv_sqrt_one_minus(alpha);
  t.gamma = 1.0 - std::sqrt(alpha);
  t.rho = std::sqrt(alpha / (1.0 - alpha));
  t.k_max = k_max;
  t.delta_max = (std::sqrt(1.0 - alpha) - std::sqrt(alpha)) / (1.0 - std::sqrt(alpha));
  return t;
}

double k_max_bound(double alpha, const SymMatrix& W, const SymMatrix& R, double sigmaA_bar, double sigmaB_bar,
                   double sigmaB_lower) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    throw OutOfRange("K_max bound requires alpha in [0, 0.5)");
  }
  if (!(sigmaA_bar > 0.0 && sigmaB_bar > 0.0 && sigmaB_lower > 0.0)) {
    throw InvalidInput("K_max bound requires positive norm bounds");
  }
  const double kappa = linalg::condition_number(W) * inv_sqrt_one_minus(alpha);
  const double gamma = 1.0 - std::sqrt(alpha);
  return linalg::condition_number(R) * (sigmaB_bar / (sigmaB_lower * sigmaB_lower)) *
         (kappa * (1.0 - gamma) + sigmaA_bar);
}

}  // namespace coco::control

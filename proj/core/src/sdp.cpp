#include "coco/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/QR>

#include "coco/linalg.hpp"

namespace coco::sdp {

namespace {

using Blocks = std::vector<Matrix>;

constexpr double kStepFraction = 0.99;
constexpr double kPresolveThreshold = 1e-12;
constexpr double kInfeasRatio = 1e-8;
constexpr int kMinItersForInfeasibility = 10;

// Constraint operator stored as one (rows x n^2) matrix per block so that
// A(X) and A^*(y) are plain matrix-vector products.
struct Operator {
  std::vector<int> dims;
  std::vector<Matrix> rows;  // rows[b].row(k) == vec(A_kb)^T
  Blocks C;
  Vector b;

  Eigen::Index m() const { return b.size(); }
};

Operator compile(const Problem& problem, const std::vector<int>& keep) {
  Operator op;
  op.dims = problem.block_dims;
  op.C = problem.objective;
  const auto m = static_cast<Eigen::Index>(keep.size());
  op.b.resize(m);
  for (std::size_t bi = 0; bi < op.dims.size(); ++bi) {
    const int n = op.dims[bi];
    Matrix rows(m, n * n);
    for (Eigen::Index k = 0; k < m; ++k) {
      const SymMatrix& coeff = problem.constraints[static_cast<std::size_t>(keep[k])].coeffs[bi];
      rows.row(k) = Eigen::Map<const Vector>(coeff.data(), coeff.size()).transpose();
    }
    op.rows.push_back(std::move(rows));
  }
  for (Eigen::Index k = 0; k < m; ++k) {
    op.b(k) = problem.constraints[static_cast<std::size_t>(keep[k])].rhs;
  }
  return op;
}

Vector apply_op(const Operator& op, const Blocks& X) {
  Vector out = Vector::Zero(op.m());
  for (std::size_t bi = 0; bi < X.size(); ++bi) {
    out.noalias() += op.rows[bi] * Eigen::Map<const Vector>(X[bi].data(), X[bi].size());
  }
  return out;
}

Blocks adjoint(const Operator& op, const Vector& y) {
  Blocks out;
  out.reserve(op.dims.size());
  for (std::size_t bi = 0; bi < op.dims.size(); ++bi) {
    const int n = op.dims[bi];
    Vector v = op.rows[bi].transpose() * y;
    out.push_back(linalg::symmetrize(Eigen::Map<const Matrix>(v.data(), n, n)));
  }
  return out;
}

double inner(const Blocks& X, const Blocks& Y) {
  double s = 0.0;
  for (std::size_t bi = 0; bi < X.size(); ++bi) {
    s += X[bi].cwiseProduct(Y[bi]).sum();
  }
  return s;
}

double max_abs(const Blocks& X) {
  double s = 0.0;
  for (const auto& B : X) {
    if (B.size() > 0) {
      s = std::max(s, B.cwiseAbs().maxCoeff());
    }
  }
  return s;
}

Blocks identity_blocks(const std::vector<int>& dims) {
  Blocks out;
  for (int n : dims) {
    out.push_back(Matrix::Identity(n, n));
  }
  return out;
}

Blocks zero_blocks(const std::vector<int>& dims) {
  Blocks out;
  for (int n : dims) {
    out.push_back(Matrix::Zero(n, n));
  }
  return out;
}

Blocks scaled(const Blocks& X, double s) {
  Blocks out = X;
  for (auto& B : out) {
    B *= s;
  }
  return out;
}

// Row-wise evaluation against the (unreduced) problem so that verify() and
// the solver's final report share one code path.
Vector row_values(const Problem& problem, const Blocks& X) {
  Vector out(static_cast<Eigen::Index>(problem.constraints.size()));
  for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
    double s = 0.0;
    for (std::size_t bi = 0; bi < X.size(); ++bi) {
      s += problem.constraints[k].coeffs[bi].cwiseProduct(X[bi]).sum();
    }
    out(static_cast<Eigen::Index>(k)) = s;
  }
  return out;
}

Blocks row_adjoint(const Problem& problem, const Vector& y) {
  Blocks out = zero_blocks(problem.block_dims);
  for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
    const double yk = y(static_cast<Eigen::Index>(k));
    if (yk == 0.0) {
      continue;
    }
    for (std::size_t bi = 0; bi < out.size(); ++bi) {
      out[bi] += yk * problem.constraints[k].coeffs[bi];
    }
  }
  return out;
}

Vector rhs_vector(const Problem& problem) {
  Vector b(static_cast<Eigen::Index>(problem.constraints.size()));
  for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
    b(static_cast<Eigen::Index>(k)) = problem.constraints[k].rhs;
  }
  return b;
}

Metrics evaluate(const Problem& problem, const Blocks& X, const Vector& y, const Blocks* S) {
  Metrics m;
  const Vector b = rhs_vector(problem);
  const Vector ax = row_values(problem, X);
  m.primal_residual = b.size() > 0 ? (ax - b).cwiseAbs().maxCoeff() : 0.0;
  Blocks dual = problem.objective;
  const Blocks aty = row_adjoint(problem, y);
  for (std::size_t bi = 0; bi < dual.size(); ++bi) {
    dual[bi] -= aty[bi];
  }
  if (S != nullptr) {
    for (std::size_t bi = 0; bi < dual.size(); ++bi) {
      dual[bi] -= (*S)[bi];
    }
    m.dual_residual = max_abs(dual);
  } else {
    double worst = 0.0;
    for (const auto& D : dual) {
      worst = std::max(worst, -linalg::min_eig(linalg::symmetrize(D)));
    }
    m.dual_residual = worst;
  }
  m.gap = std::abs(inner(problem.objective, X) - b.dot(y));
  return m;
}

bool is_symmetric(const Matrix& M) {
  if (M.size() == 0) {
    return true;
  }
  const double scale = 1.0 + M.cwiseAbs().maxCoeff();
  return (M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

// ---------------------------------------------------------------------------
// Presolve

struct Presolved {
  std::vector<int> keep;
  std::vector<int> dependent;
  bool inconsistent = false;
  Vector ray;  // full-length Farkas ray when inconsistent
};

Presolved presolve(const Problem& problem) {
  Presolved out;
  const auto m = static_cast<Eigen::Index>(problem.constraints.size());
  if (m == 0) {
    return out;
  }
  Eigen::Index width = 0;
  for (int n : problem.block_dims) {
    width += static_cast<Eigen::Index>(n) * n;
  }
  Matrix stacked(width, m);  // one column per constraint row
  for (Eigen::Index k = 0; k < m; ++k) {
    Eigen::Index offset = 0;
    for (const auto& coeff : problem.constraints[static_cast<std::size_t>(k)].coeffs) {
      stacked.col(k).segment(offset, coeff.size()) =
          Eigen::Map<const Vector>(coeff.data(), coeff.size());
      offset += coeff.size();
    }
  }
  // In-order Gram-Schmidt (two passes), so a row is reported only when it
  // lies in the span of the rows before it.
  Matrix basis(width, m);
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    Vector v = stacked.col(k);
    const double norm = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index j = 0; j < rank; ++j) {
        v -= basis.col(j).dot(v) * basis.col(j);
      }
    }
    if (v.norm() > kPresolveThreshold * std::max(1.0, norm)) {
      basis.col(rank++) = v / v.norm();
      out.keep.push_back(static_cast<int>(k));
    } else {
      out.dependent.push_back(static_cast<int>(k));
    }
  }
  if (out.dependent.empty()) {
    return out;
  }

  const Vector b = rhs_vector(problem);
  Matrix kept(width, static_cast<Eigen::Index>(out.keep.size()));
  Vector b_kept(kept.cols());
  for (Eigen::Index j = 0; j < kept.cols(); ++j) {
    kept.col(j) = stacked.col(out.keep[static_cast<std::size_t>(j)]);
    b_kept(j) = b(out.keep[static_cast<std::size_t>(j)]);
  }
  Eigen::ColPivHouseholderQR<Matrix> kept_qr;
  if (kept.cols() > 0) {
    kept_qr.compute(kept);
  }
  double worst = 0.0;
  for (int k : out.dependent) {
    Vector c = kept.cols() > 0 ? Vector(kept_qr.solve(stacked.col(k))) : Vector();
    const double implied = kept.cols() > 0 ? c.dot(b_kept) : 0.0;
    const double scale = 1.0 + std::abs(b(k)) + (kept.cols() > 0 ? c.cwiseAbs().dot(b_kept.cwiseAbs()) : 0.0);
    const double mismatch = b(k) - implied;
    if (std::abs(mismatch) > 1e-9 * scale && std::abs(mismatch) > worst) {
      worst = std::abs(mismatch);
      // y = (e_k - sum_j c_j e_keep_j) / mismatch has b^T y = 1 and
      // A^*(y) = (a_k - K c) / mismatch ~ 0.
      out.ray = Vector::Zero(m);
      out.ray(k) = 1.0;
      for (Eigen::Index j = 0; j < kept.cols(); ++j) {
        out.ray(out.keep[static_cast<std::size_t>(j)]) -= c(j);
      }
      out.ray /= mismatch;
      out.inconsistent = true;
    }
  }
  return out;
}

double ray_certificate(const Problem& problem, const Vector& ray) {
  double worst = 0.0;
  for (const auto& B : row_adjoint(problem, ray)) {
    worst = std::max(worst, linalg::max_eig(linalg::symmetrize(B)));
  }
  return std::max(worst, 0.0);
}

// ---------------------------------------------------------------------------
// Interior point

struct Scaling {
  Matrix R;     // X = R Lambda R^T, S = R^-T Lambda R^-1
  Matrix Rinv;
  Matrix W;     // R R^T
  Vector lambda;
};

bool nt_scaling(const Matrix& X, const Matrix& S, Scaling& out) {
  const Eigen::LLT<Matrix> lx(X);
  const Eigen::LLT<Matrix> ls(S);
  if (lx.info() != Eigen::Success || ls.info() != Eigen::Success) {
    return false;
  }
  const Matrix Lx = lx.matrixL();
  const Matrix Ls = ls.matrixL();
  const Eigen::JacobiSVD<Matrix> svd(Ls.transpose() * Lx, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.lambda = svd.singularValues();
  if (!(out.lambda.minCoeff() > 0.0) || !out.lambda.allFinite()) {
    return false;
  }
  const Vector inv_root = out.lambda.cwiseSqrt().cwiseInverse();
  out.R = Lx * svd.matrixV() * inv_root.asDiagonal();
  out.Rinv = inv_root.asDiagonal() * svd.matrixU().transpose() * Ls.transpose();
  out.W = linalg::symmetrize(out.R * out.R.transpose());
  return true;
}

struct Direction {
  Blocks dX;
  Blocks dS;
  Vector dy;
  double dtau = 0.0;
  double dkappa = 0.0;
};

// Largest a with lambda-space iterate Lambda + a * D still PSD.
double max_step(const Vector& lambda, const Matrix& D) {
  const Vector inv_root = lambda.cwiseSqrt().cwiseInverse();
  const Matrix Z = linalg::symmetrize(inv_root.asDiagonal() * D * inv_root.asDiagonal());
  const double zmin = linalg::min_eig(Z);
  return zmin < 0.0 ? -1.0 / zmin : std::numeric_limits<double>::infinity();
}

class Engine {
 public:
  Engine(const Operator& op, const Settings& settings) : op_(op), settings_(settings) {
    degree_ = 1.0;
    for (int n : op_.dims) {
      degree_ += n;
    }
    X_ = identity_blocks(op_.dims);
    S_ = identity_blocks(op_.dims);
    y_ = Vector::Zero(op_.m());
  }

  const Blocks& X() const { return X_; }
  const Blocks& S() const { return S_; }
  const Vector& y() const { return y_; }
  double tau() const { return tau_; }
  double kappa() const { return kappa_; }

  void residuals() {
    rp_ = apply_op(op_, X_) - op_.b * tau_;
    const Blocks aty = adjoint(op_, y_);
    rd_.resize(op_.dims.size());
    for (std::size_t bi = 0; bi < op_.dims.size(); ++bi) {
      rd_[bi] = op_.C[bi] * tau_ - aty[bi] - S_[bi];
    }
    rg_ = op_.b.dot(y_) - inner(op_.C, X_) - kappa_;
  }

  double primal_residual() const { return (rp_.size() > 0 ? rp_.cwiseAbs().maxCoeff() : 0.0) / tau_; }
  double dual_residual() const { return max_abs(rd_) / tau_; }
  double gap() const { return std::abs(inner(op_.C, X_) - op_.b.dot(y_)) / tau_; }

  // One predictor-corrector iteration. Returns false on numerical breakdown.
  bool step() {
    const double mu = (inner(X_, S_) + tau_ * kappa_) / degree_;
    if (!prepare()) {
      return false;
    }

    // Predictor: affine-scaling direction.
    Blocks rc(op_.dims.size());
    for (std::size_t bi = 0; bi < rc.size(); ++bi) {
      const Vector& lam = scale_[bi].lambda;
      rc[bi] = Matrix((-lam.cwiseProduct(lam)).asDiagonal());
    }
    Direction aff;
    if (!newton(rc, -tau_ * kappa_, 1.0, aff)) {
      return false;
    }
    Blocks dxt;
    Blocks dst;
    to_scaled(aff, dxt, dst);
    const double a_aff = std::min(1.0, step_limit(aff, dxt, dst));
    double mu_aff = (tau_ + a_aff * aff.dtau) * (kappa_ + a_aff * aff.dkappa);
    for (std::size_t bi = 0; bi < X_.size(); ++bi) {
      mu_aff += ((X_[bi] + a_aff * aff.dX[bi]).cwiseProduct(S_[bi] + a_aff * aff.dS[bi])).sum();
    }
    mu_aff /= degree_;
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    // Corrector with second-order term.
    for (std::size_t bi = 0; bi < rc.size(); ++bi) {
      const Vector& lam = scale_[bi].lambda;
      const Matrix cross = dxt[bi] * dst[bi];
      rc[bi] = sigma * mu * Matrix::Identity(lam.size(), lam.size()) -
               Matrix(lam.cwiseProduct(lam).asDiagonal()) - 0.5 * (cross + cross.transpose());
    }
    const double r5 = sigma * mu - tau_ * kappa_ - aff.dtau * aff.dkappa;
    Direction dir;
    if (!newton(rc, r5, 1.0 - sigma, dir)) {
      return false;
    }
    to_scaled(dir, dxt, dst);
    const double a = std::min(1.0, kStepFraction * step_limit(dir, dxt, dst));
    if (!(a > 0.0) || !std::isfinite(a)) {
      return false;
    }
    for (std::size_t bi = 0; bi < X_.size(); ++bi) {
      X_[bi] = linalg::symmetrize(X_[bi] + a * dir.dX[bi]);
      S_[bi] = linalg::symmetrize(S_[bi] + a * dir.dS[bi]);
    }
    y_ += a * dir.dy;
    tau_ += a * dir.dtau;
    kappa_ += a * dir.dkappa;
    return tau_ > 0.0 && kappa_ > 0.0 && std::isfinite(tau_) && std::isfinite(kappa_);
  }

 private:
  bool prepare() {
    scale_.resize(op_.dims.size());
    for (std::size_t bi = 0; bi < op_.dims.size(); ++bi) {
      if (!nt_scaling(X_[bi], S_[bi], scale_[bi])) {
        return false;
      }
    }
    // Schur complement M_kl = <A_k, W A_l W> = <R^T A_k R, R^T A_l R>. It is
    // factored through a QR of the stacked scaled rows G (M = G^T G), which
    // keeps the conditioning of G rather than of its square.
    const Eigen::Index m = op_.m();
    Eigen::Index total = 0;
    for (int n : op_.dims) {
      total += static_cast<Eigen::Index>(n) * n;
    }
    Matrix G(total, m);
    Eigen::Index offset = 0;
    for (std::size_t bi = 0; bi < op_.dims.size(); ++bi) {
      const int n = op_.dims[bi];
      const Matrix& R = scale_[bi].R;
      for (Eigen::Index l = 0; l < m; ++l) {
        const Vector row = op_.rows[bi].row(l).transpose();
        const Matrix RAR = R.transpose() * Eigen::Map<const Matrix>(row.data(), n, n) * R;
        G.block(offset, l, n * n, 1) = Eigen::Map<const Vector>(RAR.data(), RAR.size());
      }
      offset += static_cast<Eigen::Index>(n) * n;
    }
    if (m > 0) {
      qr_.compute(G);
      const Vector diag = qr_.matrixR().diagonal().head(m).cwiseAbs();
      if (!(diag.minCoeff() > 1e-300) || !diag.allFinite()) {
        return false;
      }
    }
    WCW_.resize(op_.dims.size());
    for (std::size_t bi = 0; bi < op_.dims.size(); ++bi) {
      WCW_[bi] = linalg::symmetrize(scale_[bi].W * op_.C[bi] * scale_[bi].W);
    }
    const Vector g = apply_op(op_, WCW_);
    q_ = schur_solve(g + op_.b);
    X1_ = wsw(adjoint(op_, q_));
    for (std::size_t bi = 0; bi < X1_.size(); ++bi) {
      X1_[bi] -= WCW_[bi];
    }
    // b^T q - <C, X1> equals sum_b ||R^T (C - A^*(q)) R||_F^2; the squared
    // form stays positive when the difference would cancel.
    const Blocks atq = adjoint(op_, q_);
    denom_base_ = 0.0;
    for (std::size_t bi = 0; bi < op_.dims.size(); ++bi) {
      denom_base_ += (scale_[bi].R.transpose() * (op_.C[bi] - atq[bi]) * scale_[bi].R).squaredNorm();
    }
    return q_.allFinite();
  }

  // Solves G^T G x = r with G P = Q U: x = P U^-1 U^-T P^T r.
  Vector schur_solve(const Vector& r) const {
    const Eigen::Index m = r.size();
    if (m == 0) {
      return r;
    }
    const auto U = qr_.matrixR().topLeftCorner(m, m).template triangularView<Eigen::Upper>();
    Vector z = qr_.colsPermutation().transpose() * r;
    U.transpose().solveInPlace(z);
    U.solveInPlace(z);
    return qr_.colsPermutation() * z;
  }

  Blocks wsw(const Blocks& Z) const {
    Blocks out(Z.size());
    for (std::size_t bi = 0; bi < Z.size(); ++bi) {
      out[bi] = linalg::symmetrize(scale_[bi].W * Z[bi] * scale_[bi].W);
    }
    return out;
  }

  bool newton(const Blocks& rc, double r5, double eta, Direction& d) const {
    Blocks U(op_.dims.size());
    for (std::size_t bi = 0; bi < U.size(); ++bi) {
      const Scaling& sc = scale_[bi];
      const Eigen::Index n = sc.lambda.size();
      Matrix T(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
          T(i, j) = (rc[bi](i, j) + rc[bi](j, i)) / (sc.lambda(i) + sc.lambda(j));
        }
      }
      U[bi] = linalg::symmetrize(sc.R * T * sc.R.transpose() -
                                 eta * sc.W * rd_[bi] * sc.W);
    }
    const Vector p = schur_solve(-eta * rp_ - apply_op(op_, U));
    Blocks X0 = wsw(adjoint(op_, p));
    for (std::size_t bi = 0; bi < X0.size(); ++bi) {
      X0[bi] += U[bi];
    }
    const double num = -eta * rg_ - op_.b.dot(p) + inner(op_.C, X0) + r5 / tau_;
    const double den = denom_base_ + kappa_ / tau_;
    if (!(den > 0.0)) {
      return false;
    }
    d.dtau = num / den;
    d.dy = p + d.dtau * q_;
    d.dX.resize(U.size());
    for (std::size_t bi = 0; bi < U.size(); ++bi) {
      d.dX[bi] = X0[bi] + d.dtau * X1_[bi];
    }
    const Blocks aty = adjoint(op_, d.dy);
    d.dS.resize(U.size());
    for (std::size_t bi = 0; bi < U.size(); ++bi) {
      d.dS[bi] = linalg::symmetrize(-aty[bi] + op_.C[bi] * d.dtau + eta * rd_[bi]);
    }
    d.dkappa = (r5 - kappa_ * d.dtau) / tau_;
    return std::isfinite(d.dtau) && std::isfinite(d.dkappa) && d.dy.allFinite();
  }

  void to_scaled(const Direction& d, Blocks& dxt, Blocks& dst) const {
    dxt.resize(d.dX.size());
    dst.resize(d.dS.size());
    for (std::size_t bi = 0; bi < d.dX.size(); ++bi) {
      const Scaling& sc = scale_[bi];
      dxt[bi] = linalg::symmetrize(sc.Rinv * d.dX[bi] * sc.Rinv.transpose());
      dst[bi] = linalg::symmetrize(sc.R.transpose() * d.dS[bi] * sc.R);
    }
  }

  double step_limit(const Direction& d, const Blocks& dxt, const Blocks& dst) const {
    double a = std::numeric_limits<double>::infinity();
    for (std::size_t bi = 0; bi < dxt.size(); ++bi) {
      if (!dxt[bi].allFinite() || !dst[bi].allFinite()) {
        return 0.0;
      }
      a = std::min(a, max_step(scale_[bi].lambda, dxt[bi]));
      a = std::min(a, max_step(scale_[bi].lambda, dst[bi]));
    }
    if (d.dtau < 0.0) {
      a = std::min(a, -tau_ / d.dtau);
    }
    if (d.dkappa < 0.0) {
      a = std::min(a, -kappa_ / d.dkappa);
    }
    return a;
  }

  const Operator& op_;
  const Settings& settings_;
  double degree_ = 1.0;

  Blocks X_;
  Blocks S_;
  Vector y_;
  double tau_ = 1.0;
  double kappa_ = 1.0;

  Vector rp_;
  Blocks rd_;
  double rg_ = 0.0;

  std::vector<Scaling> scale_;
  Eigen::ColPivHouseholderQR<Matrix> qr_;
  Blocks WCW_;
  Vector q_;
  Blocks X1_;
  double denom_base_ = 0.0;
};

// Last resort when the interior-point iteration stalls just short of the
// tolerances: project X onto the equality constraints with the (well
// conditioned) Gram matrix of the rows and take S = C - A^*(y). Accepted only
// when both stay PSD up to 10 tol_feas.
bool polish(const Operator& op, const Settings& settings, Blocks& X, const Vector& y, Blocks& S) {
  if (op.m() > 0) {
    Matrix G = Matrix::Zero(op.m(), op.m());
    for (const auto& rows : op.rows) {
      G.noalias() += rows * rows.transpose();
    }
    const Eigen::LDLT<Matrix> ldlt(linalg::symmetrize(G));
    if (ldlt.info() != Eigen::Success) {
      return false;
    }
    const Vector correction = ldlt.solve(op.b - apply_op(op, X));
    const Blocks dX = adjoint(op, correction);
    for (std::size_t bi = 0; bi < X.size(); ++bi) {
      X[bi] = linalg::symmetrize(X[bi] + dX[bi]);
    }
  }
  const Blocks aty = adjoint(op, y);
  for (std::size_t bi = 0; bi < S.size(); ++bi) {
    S[bi] = linalg::symmetrize(op.C[bi] - aty[bi]);
  }
  for (std::size_t bi = 0; bi < X.size(); ++bi) {
    if (!X[bi].allFinite() || linalg::min_eig(X[bi]) < -10.0 * settings.tol_feas ||
        linalg::min_eig(S[bi]) < -10.0 * settings.tol_feas) {
      return false;
    }
  }
  return true;
}

Vector expand_dual(const Vector& y_reduced, const std::vector<int>& keep, std::size_t m) {
  Vector y = Vector::Zero(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    y(keep[j]) = y_reduced(static_cast<Eigen::Index>(j));
  }
  return y;
}

}  // namespace

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::PrimalInfeasible: return "primal-infeasible";
    case Status::DualInfeasible: return "dual-infeasible";
    case Status::MaxIterations: return "max-iterations";
  }
  return "unknown";
}

void validate(const Problem& problem) {
  const auto nb = problem.block_dims.size();
  if (nb == 0) {
    throw InvalidProblem("sdp: problem has no blocks");
  }
  for (int n : problem.block_dims) {
    if (n < 1) {
      throw InvalidProblem("sdp: block dimensions must be >= 1");
    }
  }
  auto check = [&](const std::vector<SymMatrix>& mats, const std::string& where) {
    if (mats.size() != nb) {
      throw InvalidProblem("sdp: " + where + " has " + std::to_string(mats.size()) +
                           " blocks, expected " + std::to_string(nb));
    }
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const int n = problem.block_dims[bi];
      if (mats[bi].rows() != n || mats[bi].cols() != n) {
        std::ostringstream os;
        os << "sdp: " << where << " block " << bi << " is " << mats[bi].rows() << "x"
           << mats[bi].cols() << ", expected " << n << "x" << n;
        throw InvalidProblem(os.str());
      }
      if (!mats[bi].allFinite() || !is_symmetric(mats[bi])) {
        throw InvalidProblem("sdp: " + where + " block " + std::to_string(bi) +
                             " is not finite and symmetric");
      }
    }
  };
  check(problem.objective, "objective");
  for (std::size_t k = 0; k < problem.constraints.size(); ++k) {
    check(problem.constraints[k].coeffs, "constraint " + std::to_string(k));
    if (!std::isfinite(problem.constraints[k].rhs)) {
      throw InvalidProblem("sdp: constraint " + std::to_string(k) + " has a non-finite rhs");
    }
  }
  const Settings& s = problem.settings;
  if (!(s.tol_gap > 0.0) || !(s.tol_feas > 0.0) || s.max_iter < 1) {
    throw InvalidProblem("sdp: tolerances must be positive and max_iter >= 1");
  }
}

Solution solve(const Problem& problem) {
  validate(problem);
  const Settings& settings = problem.settings;
  const std::size_t m = problem.constraints.size();

  Solution sol;
  const Presolved pre = presolve(problem);
  if (pre.inconsistent) {
    sol.status = Status::PrimalInfeasible;
    sol.primal = zero_blocks(problem.block_dims);
    sol.dual = pre.ray;
    sol.dual_slack = zero_blocks(problem.block_dims);
    sol.certificate_residual = ray_certificate(problem, pre.ray);
    sol.dropped_rows = pre.dependent;
    sol.metrics = evaluate(problem, sol.primal, sol.dual, &sol.dual_slack);
    return sol;
  }
  std::vector<int> keep = pre.keep;
  if (!pre.dependent.empty()) {
    if (settings.presolve == PresolveMode::Reject) {
      std::ostringstream os;
      os << "sdp: linearly dependent constraint rows:";
      for (int k : pre.dependent) {
        os << ' ' << k;
      }
      throw PresolveError(os.str(), pre.dependent);
    }
    sol.dropped_rows = pre.dependent;
  }
  const Operator op = compile(problem, keep);
  Engine engine(op, settings);

  int iter = 0;
  Status status = Status::MaxIterations;
  for (;; ++iter) {
    engine.residuals();
    if (engine.primal_residual() <= settings.tol_feas && engine.dual_residual() <= settings.tol_feas &&
        engine.gap() <= settings.tol_gap) {
      status = Status::Optimal;
      break;
    }
    if (iter >= kMinItersForInfeasibility && engine.tau() < kInfeasRatio * engine.kappa()) {
      const double by = op.b.dot(engine.y());
      const double cx = inner(op.C, engine.X());
      if (by > 0.0) {
        const Vector ray = expand_dual(engine.y(), keep, m) / by;
        const double cert = ray_certificate(problem, ray);
        if (cert <= settings.tol_feas) {
          sol.status = Status::PrimalInfeasible;
          sol.primal = zero_blocks(problem.block_dims);
          sol.dual = ray;
          sol.dual_slack = scaled(engine.S(), 1.0 / by);
          sol.certificate_residual = cert;
          sol.metrics = evaluate(problem, sol.primal, sol.dual, &sol.dual_slack);
          sol.metrics.iterations = iter;
          return sol;
        }
      }
      if (cx < 0.0) {
        const Blocks ray = scaled(engine.X(), -1.0 / cx);
        const Vector ax = row_values(problem, ray);
        const double cert = ax.size() > 0 ? ax.cwiseAbs().maxCoeff() : 0.0;
        if (cert <= settings.tol_feas) {
          sol.status = Status::DualInfeasible;
          sol.primal = ray;
          sol.dual = Vector::Zero(static_cast<Eigen::Index>(m));
          sol.dual_slack = zero_blocks(problem.block_dims);
          sol.certificate_residual = cert;
          sol.metrics = evaluate(problem, sol.primal, sol.dual, &sol.dual_slack);
          sol.metrics.iterations = iter;
          return sol;
        }
      }
    }
    if (iter >= settings.max_iter || !engine.step()) {
      status = Status::MaxIterations;
      break;
    }
  }

  const double inv_tau = 1.0 / engine.tau();
  sol.status = status;
  sol.primal = scaled(engine.X(), inv_tau);
  sol.dual = expand_dual(engine.y() * inv_tau, keep, m);
  sol.dual_slack = scaled(engine.S(), inv_tau);
  sol.metrics = evaluate(problem, sol.primal, sol.dual, &sol.dual_slack);
  if (status == Status::MaxIterations) {
    Blocks X = sol.primal;
    Blocks S = sol.dual_slack;
    const Vector y = engine.y() * inv_tau;
    if (polish(op, settings, X, y, S)) {
      const Metrics polished = evaluate(problem, X, sol.dual, &S);
      if (polished.primal_residual <= settings.tol_feas && polished.dual_residual <= settings.tol_feas &&
          polished.gap <= settings.tol_gap) {
        sol.primal = std::move(X);
        sol.dual_slack = std::move(S);
        sol.metrics = polished;
        sol.status = Status::Optimal;
        status = Status::Optimal;
      }
    }
  }
  sol.objective = inner(problem.objective, sol.primal);
  sol.metrics.iterations = iter;
  if (status == Status::Optimal &&
      (sol.metrics.primal_residual > settings.tol_feas || sol.metrics.dual_residual > settings.tol_feas ||
       sol.metrics.gap > settings.tol_gap)) {
    // Dropped rows are only satisfied to presolve accuracy.
    sol.status = Status::MaxIterations;
  }
  return sol;
}

Metrics verify(const Problem& problem, const Solution& solution) {
  validate(problem);
  if (solution.primal.size() != problem.block_dims.size()) {
    throw InvalidProblem("sdp::verify: primal block count mismatch");
  }
  Vector y = solution.dual;
  if (y.size() == 0) {
    y = Vector::Zero(static_cast<Eigen::Index>(problem.constraints.size()));
  }
  if (y.size() != static_cast<Eigen::Index>(problem.constraints.size())) {
    throw InvalidProblem("sdp::verify: dual length mismatch");
  }
  for (std::size_t bi = 0; bi < problem.block_dims.size(); ++bi) {
    const int n = problem.block_dims[bi];
    if (solution.primal[bi].rows() != n || solution.primal[bi].cols() != n) {
      throw InvalidProblem("sdp::verify: primal block shape mismatch");
    }
  }
  const bool have_slack = solution.dual_slack.size() == problem.block_dims.size();
  Metrics m = evaluate(problem, solution.primal, y, have_slack ? &solution.dual_slack : nullptr);
  m.iterations = solution.metrics.iterations;
  return m;
}

}  // namespace coco::sdp

#include "coco/stability.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "coco/linalg.hpp"

namespace coco::stability {

Theorem1Params theorem1_params(double alpha, const SymMatrix& W) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    throw OutOfRange("stability guarantee requires alpha in [0, 0.5)");
  }
  Theorem1Params p;
  p.kappa = linalg::condition_number(W) / std::sqrt(1.0 - alpha);
  p.gamma = 1.0 - std::sqrt(alpha);
  p.rho = std::sqrt(alpha / (1.0 - alpha));
  return p;
}

Decomposition decompose(const Matrix& A, const Matrix& B, const Matrix& K, const SymMatrix& sigma_xx) {
  if (B.rows() != A.rows() || K.rows() != B.cols() || K.cols() != A.cols() || sigma_xx.rows() != A.rows()) {
    throw InvalidInput("decompose: dimension mismatch");
  }
  Decomposition out;
  out.H = linalg::psd_sqrt(sigma_xx);
  const Eigen::LLT<Matrix> llt(out.H);
  if (llt.info() != Eigen::Success) {
    throw NotPd("decompose: Sigma_xx is not positive definite");
  }
  out.L = llt.solve((A + B * K) * out.H);
  return out;
}

Certificate certify_sequence(const std::vector<StepInput>& steps, double alpha, const SymMatrix& W, int t0) {
  if (steps.empty()) {
    throw InvalidInput("certify_sequence: empty sequence");
  }
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    throw InvalidInput("certify_sequence: alpha must lie in [0, 1)");
  }
  Certificate cert;
  cert.sqrt_alpha = std::sqrt(alpha);
  cert.kappa = linalg::condition_number(W) / std::sqrt(1.0 - alpha);
  cert.transition_cap = 1.0 / std::sqrt(1.0 - alpha);

  std::vector<Decomposition> parts;
  parts.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    parts.push_back(decompose(s.A, s.B, s.K, s.sigma_xx));
    const auto& dec = parts.back();
    StepRecord rec;
    rec.t = t0 + static_cast<int>(i);
    rec.norm_L = linalg::spectral_norm(dec.L);
    const Vector lam = linalg::sym_eigenvalues(dec.H);
    rec.norm_H = lam(lam.size() - 1);
    rec.norm_Hinv = 1.0 / lam(0);
    rec.kappa_t = rec.norm_H * rec.norm_Hinv;
    rec.reconstruction =
        (dec.H * dec.L * dec.H.llt().solve(Matrix::Identity(dec.H.rows(), dec.H.cols())) - (s.A + s.B * s.K))
            .norm();
    rec.transition_norm = std::numeric_limits<double>::quiet_NaN();
    cert.steps.push_back(rec);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    const Matrix T = parts[i + 1].H.llt().solve(parts[i].H);
    cert.steps[i].transition_norm = linalg::spectral_norm(T);
  }

  cert.pass = true;
  for (auto& rec : cert.steps) {
    bool ok = rec.norm_L <= cert.sqrt_alpha + cert.tolerance && rec.kappa_t <= cert.kappa + cert.tolerance;
    if (!std::isnan(rec.transition_norm)) {
      ok = ok && rec.transition_norm <= cert.transition_cap + cert.tolerance;
      cert.max_transition = std::max(cert.max_transition, rec.transition_norm);
    }
    rec.pass = ok;
    cert.max_norm_L = std::max(cert.max_norm_L, rec.norm_L);
    cert.max_kappa_t = std::max(cert.max_kappa_t, rec.kappa_t);
    if (!ok) {
      cert.failing.push_back(rec.t);
      cert.pass = false;
    }
  }
  return cert;
}

void write_certificate_csv(std::ostream& os, const Certificate& cert) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << "t,norm_L,kappa_t,transition_norm,pass\n";
  for (const auto& r : cert.steps) {
    os << r.t << ',' << r.norm_L << ',' << r.kappa_t << ',';
    if (std::isnan(r.transition_norm)) {
      os << "nan";
    } else {
      os << r.transition_norm;
    }
    os << ',' << (r.pass ? 1 : 0) << '\n';
  }
  os.precision(old);
}

double IssEnvelope::bound(int t) const {
  return kappa * std::pow(rho, t - t0) * x_t0_norm + kappa * rho / (1.0 - rho) * noise_sup;
}

AuditResult iss_audit(const std::vector<Vector>& states, const IssEnvelope& envelope) {
  if (!std::isfinite(envelope.noise_sup)) {
    throw InvalidInput("iss_audit: noise must be bounded (use truncated noise)");
  }
  if (!(envelope.rho >= 0.0 && envelope.rho < 1.0) || !(envelope.kappa >= 1.0 - 1e-12)) {
    throw InvalidInput("iss_audit: envelope requires 0 <= rho < 1 and kappa >= 1");
  }
  AuditResult out;
  for (std::size_t t = static_cast<std::size_t>(std::max(envelope.t0, 0)); t < states.size(); ++t) {
    const double norm = states[t].norm();
    const double b = envelope.bound(static_cast<int>(t));
    ++out.checked;
    if (!std::isfinite(norm) || norm > b * (1.0 + 1e-9)) {
      ++out.violations;
    }
    const double ratio = b > 0.0 ? norm / b : (norm > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    out.max_ratio = std::max(out.max_ratio, ratio);
  }
  return out;
}

double Theorem2Envelope::bound(int t, double x1_norm, double w_sup) const {
  const double decay = std::pow(rho, static_cast<double>(t) / horizon - 1.0);
  const double gain = rho < 1.0 ? std::max(1.0, rho / (1.0 - rho)) : std::numeric_limits<double>::infinity();
  return kappa_A_prime * decay * x1_norm + kappa_A_prime * kappa_A * kappa * gain * w_sup;
}

Theorem2Envelope theorem2_envelope(double alpha, const SymMatrix& W, double a, double b, int H, double sigma,
                                   double kappa_R) {
  if (!(a > 0.0 && b > 0.0 && sigma > 0.0) || H < 1 || !(kappa_R >= 1.0 - 1e-12)) {
    throw InvalidInput("theorem2_envelope: requires a, b, sigma > 0, H >= 1 and kappa_R >= 1");
  }
  const Theorem1Params base = theorem1_params(alpha, W);
  Theorem2Envelope env;
  env.horizon = H;
  env.kappa = base.kappa;
  env.rho = base.rho;
  double power = 1.0;
  for (int i = 0; i < H; ++i) {
    env.kappa_A += power;
    power *= a;
  }
  // power == a^H here.
  env.kappa_A_prime = std::pow(a, H - 1) + b * b * env.kappa_A * env.kappa_A * kappa_R * (env.kappa + power) / sigma;
  return env;
}

}  // namespace coco::stability

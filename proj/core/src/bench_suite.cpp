#include "coco/bench_suite.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "coco/baselines.hpp"
#include "coco/controller.hpp"
#include "coco/csv.hpp"
#include "coco/harness.hpp"
#include "coco/linalg.hpp"
#include "coco/rng.hpp"
#include "coco/scenarios.hpp"
#include "coco/stability.hpp"

namespace coco::bench {

namespace {

using harness::Algorithm;
using harness::NoiseKind;
using harness::SimConfig;

constexpr std::uint64_t kSuiteSeed = 20240611;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os << std::setprecision(digits) << v;
  return os.str();
}

Matrix gaussian(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n01;
  Matrix M(rows, cols);
  for (Eigen::Index i = 0; i < M.size(); ++i) {
    M.data()[i] = n01(rng);
  }
  return M;
}

SymMatrix random_pd(std::mt19937_64& rng, int n) {
  const Matrix G = gaussian(rng, n, n);
  SymMatrix W = G * G.transpose() / n + 0.5 * SymMatrix::Identity(n, n);
  return W / linalg::spectral_norm(W);
}

void write_artifact(const SuiteOptions& options, const std::string& name, const std::function<void(std::ostream&)>& fn) {
  if (options.artifact_dir.empty()) {
    return;
  }
  std::filesystem::create_directories(options.artifact_dir);
  std::ofstream os(std::filesystem::path(options.artifact_dir) / name);
  fn(os);
}

// Closed-loop stationary covariance under the DARE gain, used to pick an
// alpha at which the covariance constraint is slack.
double alpha_for_inactive(const Matrix& A, const Matrix& B, const Matrix& K, const SymMatrix& W) {
  const Matrix M = A + B * K;
  const SymMatrix sigma = linalg::lyapunov_discrete(M, W);
  const SymMatrix w_inv_sqrt = linalg::pd_inv_sqrt(W);
  const double ratio = linalg::max_eig(linalg::symmetrize(w_inv_sqrt * sigma * w_inv_sqrt));
  return 1.0 - 1.0 / ratio;
}

Outcome dare_equivalence() {
  const auto start = std::chrono::steady_clock::now();
  control::Cost scalar{SymMatrix::Ones(1, 1), SymMatrix::Ones(1, 1), SymMatrix::Ones(1, 1)};
  const auto step = control::coco_step(Matrix::Ones(1, 1), Matrix::Ones(1, 1), scalar, {0.4, std::nullopt, {}});
  const double k_scalar = step.status == control::StepStatus::Ok ? step.K(0, 0) : std::nan("");
  const bool scalar_ok = std::abs(k_scalar - (-0.6180339887498949)) <= 1e-4;

  auto rng = stream_rng(kSuiteSeed, 1, 0);
  std::uniform_int_distribution<int> dim(1, 3);
  int matched = 0;
  int drawn = 0;
  double worst = 0.0;
  while (matched < 20 && drawn < 500) {
    ++drawn;
    const int d = dim(rng);
    const int p = std::uniform_int_distribution<int>(d, 3)(rng);
    const Matrix A = 0.6 * gaussian(rng, d, d);
    const Matrix B = gaussian(rng, d, p);
    if (linalg::min_singular_value(B) < 0.2) {
      continue;
    }
    const SymMatrix Q = random_pd(rng, d);
    const SymMatrix R = random_pd(rng, p);
    const SymMatrix W = random_pd(rng, d);
    baselines::RiccatiResult ric;
    try {
      ric = baselines::dare(A, B, Q, R);
    } catch (const Error&) {
      continue;
    }
    const double a_min = alpha_for_inactive(A, B, ric.K, W);
    if (!(a_min < 0.85)) {
      continue;
    }
    const double alpha = std::max(0.4, a_min + 0.5 * (1.0 - a_min));
    const auto s = control::coco_step(A, B, {Q, R, W}, {alpha, std::nullopt, {}});
    if (s.status != control::StepStatus::Ok) {
      worst = std::numeric_limits<double>::infinity();
      ++matched;
      continue;
    }
    worst = std::max(worst, (s.K - ric.K).cwiseAbs().maxCoeff() / std::max(1.0, ric.K.cwiseAbs().maxCoeff()));
    ++matched;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Outcome out;
  out.pass = scalar_ok && matched == 20 && worst <= 1e-5 && seconds < 10.0;
  out.detail = "scalar K=" + fmt(k_scalar, 7) + ", 20 random systems max rel gain error " + fmt(worst, 3) +
               " (" + std::to_string(matched) + " compared), " + fmt(seconds, 3) + " s";
  return out;
}

Outcome feasibility() {
  auto rng = stream_rng(kSuiteSeed, 2, 0);
  std::uniform_int_distribution<int> dim(1, 3);
  int solved = 0;
  int total = 0;
  double worst_residual = 0.0;
  double worst_sigma0 = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int d = dim(rng);
    const int p = std::uniform_int_distribution<int>(d, 3)(rng);
    const Matrix A = gaussian(rng, d, d);
    Matrix B = gaussian(rng, d, p);
    while (linalg::min_singular_value(B) < 1e-3) {
      B = gaussian(rng, d, p);
    }
    const SymMatrix Q = random_pd(rng, d);
    const SymMatrix R = random_pd(rng, p);
    const SymMatrix W = random_pd(rng, d);
    for (double alpha : {0.0, 0.25, 0.49}) {
      ++total;
      const auto s = control::coco_step(A, B, {Q, R, W}, {alpha, std::nullopt, {}});
      const double res = std::max(s.metrics.primal_residual, s.metrics.dual_residual);
      if (s.status == control::StepStatus::Ok && s.sdp_status == sdp::Status::Optimal && res <= 1e-6) {
        ++solved;
      }
      worst_residual = std::max(worst_residual, res);

      const sdp::Problem problem = control::build_coco_sdp(A, B, Q, R, W, alpha);
      const SymMatrix sigma0 = control::build_feasible_point(A, B, W);
      sdp::Solution candidate;
      candidate.primal = {sigma0, linalg::symmetrize(W / (1.0 - alpha) - sigma0.topLeftCorner(d, d))};
      candidate.dual = Vector::Zero(static_cast<Eigen::Index>(problem.constraints.size()));
      worst_sigma0 = std::max(worst_sigma0, sdp::verify(problem, candidate).primal_residual);
    }
  }
  Outcome out;
  out.pass = solved == total && worst_sigma0 <= 1e-10;
  out.detail = std::to_string(solved) + "/" + std::to_string(total) + " optimal, max residual " +
               fmt(worst_residual, 3) + ", feasible-point equality residual " + fmt(worst_sigma0, 3);
  return out;
}

Outcome sequential_stability(const SuiteOptions& options) {
  SimConfig c;
  c.alpha = 0.4;
  c.steps = 500;
  c.seed = kSuiteSeed;
  const auto run = harness::simulate(c);
  const auto cert = stability::certify_sequence(run.trajectory.certificates, c.alpha, run.trajectory.certificate_W);
  write_artifact(options, "certificate_switching.csv",
                 [&](std::ostream& os) { stability::write_certificate_csv(os, cert); });
  Outcome out;
  out.pass = !run.trajectory.terminated && cert.steps.size() == 500 && cert.pass;
  out.detail = std::to_string(cert.steps.size()) + " steps, " + std::to_string(cert.failing.size()) +
               " failing; margins L " + fmt(cert.margin_L(), 3) + ", kappa " + fmt(cert.margin_kappa(), 3) +
               ", transition " + fmt(cert.margin_transition(), 3);
  return out;
}

struct IssRun {
  int violations = 0;
  double max_ratio = 0.0;
  bool terminated = false;
};

IssRun iss_run(SimConfig c, double kappa, double rho) {
  const auto run = harness::simulate(c);
  stability::IssEnvelope env{0, kappa, rho, run.report.sup_noise_norm, run.trajectory.states.front().norm()};
  const auto audit = stability::iss_audit(run.trajectory.states, env);
  return {audit.violations, audit.max_ratio, run.trajectory.terminated};
}

Outcome iss_envelope(int seeds) {
  const auto params = stability::theorem1_params(0.4, SymMatrix::Identity(2, 2));
  const bool constants_ok = std::abs(params.kappa - 1.2910) <= 1e-4 && std::abs(params.rho - 0.8165) <= 1e-4;
  int violations = 0;
  int terminated = 0;
  double max_ratio = 0.0;
  for (int s = 0; s < seeds; ++s) {
    SimConfig c;
    c.alpha = 0.4;
    c.steps = 500;
    c.seed = kSuiteSeed + static_cast<std::uint64_t>(s);
    c.noise = NoiseKind::TruncatedGaussian;
    c.noise_cap = 3.0;
    const IssRun r = iss_run(c, params.kappa, params.rho);
    violations += r.violations;
    terminated += r.terminated ? 1 : 0;
    max_ratio = std::max(max_ratio, r.max_ratio);
  }
  Outcome out;
  out.pass = constants_ok && violations == 0 && terminated == 0;
  out.detail = "kappa=" + fmt(params.kappa, 5) + " rho=" + fmt(params.rho, 4) + ", " + std::to_string(violations) +
               " violations over " + std::to_string(seeds) + " seeds, max ||x||/bound " + fmt(max_ratio, 3);
  return out;
}

Outcome naive_instability(int seeds) {
  const auto provider = scenarios::switching();
  const Matrix AA = provider->next(0, {}).A * provider->next(1, {}).A;
  const double lmax = linalg::max_eig(linalg::symmetrize(AA));
  const bool eig_ok = lmax >= 0.99 * 0.99 + 1.5 * 1.5 / 2.0 - 1e-12;

  const auto params = stability::theorem1_params(0.4, SymMatrix::Identity(2, 2));
  int exploded = 0;
  int first_max = 0;
  int coco_violations = 0;
  for (int s = 0; s < seeds; ++s) {
    SimConfig naive;
    naive.algorithm = Algorithm::NaiveLTI;
    naive.steps = 200;
    naive.q = 0.2;
    naive.r = 1.0;
    naive.seed = kSuiteSeed + static_cast<std::uint64_t>(s);
    const auto run = harness::simulate(naive);
    int first = -1;
    for (std::size_t t = 0; t < run.trajectory.states.size() && t <= 200; ++t) {
      if (run.trajectory.states[t].norm() > 1e3) {
        first = static_cast<int>(t);
        break;
      }
    }
    if (first >= 0) {
      ++exploded;
      first_max = std::max(first_max, first);
    }
    SimConfig coco = naive;
    coco.algorithm = Algorithm::CocoLQ;
    coco.alpha = 0.4;
    const IssRun r = iss_run(coco, params.kappa, params.rho);
    coco_violations += r.violations + (r.terminated ? 1 : 0);
  }
  Outcome out;
  out.pass = eig_ok && exploded == seeds && coco_violations == 0;
  out.detail = "lambda_max(AA')=" + fmt(lmax, 5) + ", naive exceeded 1e3 on " + std::to_string(exploded) + "/" +
               std::to_string(seeds) + " seeds (latest at t=" + std::to_string(first_max) +
               "), COCO-LQ envelope violations " + std::to_string(coco_violations);
  return out;
}

Outcome adversary() {
  std::string detail;
  bool pass = true;
  for (Algorithm alg : {Algorithm::NaiveLTI, Algorithm::CocoLQ}) {
    SimConfig c;
    c.scenario = "adversarial";
    c.algorithm = alg;
    c.steps = 80;
    c.noise = NoiseKind::Zero;
    c.on_failure = harness::FailurePolicy::ZeroControl;
    c.divergence_limit = std::numeric_limits<double>::max();
    const auto run = harness::simulate(c);
    double worst = std::numeric_limits<double>::infinity();
    int checked = 0;
    for (int k = 0; k <= 40 && 2 * static_cast<std::size_t>(k) < run.trajectory.states.size(); ++k) {
      worst = std::min(worst, run.trajectory.states[2 * static_cast<std::size_t>(k)](1) /
                                  scenarios::adversary_lower_bound(k));
      ++checked;
    }
    pass = pass && checked == 41 && worst >= 1.0;
    detail += std::string(detail.empty() ? "" : "; ") + harness::to_string(alg) + " min x_{2k,2}/1.5^k " +
              fmt(worst, 4) + " over k<=" + std::to_string(checked - 1);
  }
  return {pass, detail};
}

Outcome prediction_rescue(int seeds) {
  const double alpha = 0.3;
  const int H = 2;
  const auto provider = scenarios::rank_deficient_pair();
  const auto lifted = control::lift(provider->prediction_window(0, H), SymMatrix::Identity(1, 1),
                                    0.01 * SymMatrix::Identity(2, 2));
  double a = 0.0;
  double b = 0.0;
  for (int t = 0; t < 2; ++t) {
    const Dynamics d = provider->next(t, {});
    a = std::max(a, linalg::spectral_norm(d.A));
    b = std::max(b, linalg::spectral_norm(d.B));
  }
  int bad = 0;
  int cert_fail = 0;
  int violations = 0;
  double sup = 0.0;
  for (int s = 0; s < seeds; ++s) {
    SimConfig c;
    c.scenario = "rank-deficient-pair";
    c.algorithm = Algorithm::CocoLQPredict;
    c.alpha = alpha;
    c.horizon = H;
    c.steps = 500;
    c.seed = kSuiteSeed + static_cast<std::uint64_t>(s);
    c.noise = NoiseKind::TruncatedGaussian;
    const auto run = harness::simulate(c);
    bad += run.trajectory.terminated ? 1 : 0;
    sup = std::max(sup, run.report.sup_state_norm);
    const auto cert = stability::certify_sequence(run.trajectory.certificates, alpha, run.trajectory.certificate_W);
    cert_fail += (cert.pass && cert.steps.size() == 250) ? 0 : 1;
    const auto env = stability::theorem2_envelope(alpha, run.trajectory.certificate_W, a, b, H, lifted.sigma, 1.0);
    const double x1 = run.trajectory.states.front().norm();
    for (std::size_t t = 0; t < run.trajectory.states.size(); ++t) {
      if (run.trajectory.states[t].norm() > env.bound(static_cast<int>(t) + 1, x1, run.report.sup_noise_norm)) {
        ++violations;
      }
    }
  }
  Outcome out;
  out.pass = lifted.sigma > 0.0 && bad == 0 && sup < 1e3 && cert_fail == 0 && violations == 0;
  out.detail = "lifted sigma=" + fmt(lifted.sigma, 4) + ", sup||x||=" + fmt(sup, 4) + ", certificate failures " +
               std::to_string(cert_fail) + ", envelope violations " + std::to_string(violations) + " over " +
               std::to_string(seeds) + " seeds";
  return out;
}

Outcome estimation_robustness(int seeds) {
  const double alpha = 0.4;
  const double delta = 0.2;
  const SymMatrix W = SymMatrix::Identity(2, 2);
  const auto provider = scenarios::switching();
  double a_bar = 0.0;
  for (int t = 0; t < 2; ++t) {
    a_bar = std::max(a_bar, linalg::spectral_norm(provider->next(t, {}).A));
  }
  const double k_max = control::k_max_bound(alpha, W, SymMatrix::Identity(2, 2), a_bar, 1.0, 1.0);
  const auto tol = control::estimation_tolerance(alpha, W, k_max);
  const double error = 0.9 * tol.rhs(delta);
  const double rho_p = tol.rho_prime(delta);
  int violations = 0;
  int terminated = 0;
  double max_ratio = 0.0;
  for (int s = 0; s < seeds; ++s) {
    SimConfig c;
    c.alpha = alpha;
    c.steps = 500;
    c.seed = kSuiteSeed + static_cast<std::uint64_t>(s);
    c.noise = NoiseKind::TruncatedGaussian;
    c.params["perturb"] = error;
    const IssRun r = iss_run(c, tol.kappa, rho_p);
    violations += r.violations;
    terminated += r.terminated ? 1 : 0;
    max_ratio = std::max(max_ratio, r.max_ratio);
  }
  Outcome out;
  out.pass = violations == 0 && terminated == 0;
  out.detail = "K_max=" + fmt(k_max, 5) + ", error=" + fmt(error, 4) + " (0.9 x rhs), rho'=" + fmt(rho_p, 4) + ", " +
               std::to_string(violations) + " violations over " + std::to_string(seeds) + " seeds, max ratio " +
               fmt(max_ratio, 3);
  return out;
}

// Decrease followed by an increase or a divergence anywhere along the sweep.
bool has_u_shape(const std::vector<harness::SweepRow>& rows) {
  auto cost = [](const harness::SweepRow& r) {
    if (!r.error.empty() || r.report.diverged || !r.report.normalized) {
      return std::numeric_limits<double>::infinity();
    }
    return *r.report.normalized;
  };
  for (std::size_t j = 1; j + 1 < rows.size(); ++j) {
    bool dropped = false;
    for (std::size_t i = 0; i < j; ++i) {
      dropped = dropped || cost(rows[i]) > cost(rows[j]);
    }
    if (!dropped) {
      continue;
    }
    for (std::size_t k = j + 1; k < rows.size(); ++k) {
      if (cost(rows[k]) > cost(rows[j])) {
        return true;
      }
    }
  }
  return false;
}

Outcome cost_behavior(const SuiteOptions& options) {
  SimConfig base;
  base.steps = 500;
  base.seed = kSuiteSeed;
  base.normalize = true;
  std::vector<double> alphas;
  for (int i = 0; i <= 12; ++i) {
    alphas.push_back(0.30 + 0.05 * i);
  }
  const auto rows = harness::alpha_sweep(base, alphas, options.seeds);
  write_artifact(options, "sweep_switching.csv", [&](std::ostream& os) { csv::write_sweep(os, rows); });
  double best = std::numeric_limits<double>::infinity();
  double best_alpha = 0.0;
  for (const auto& r : rows) {
    if (r.error.empty() && r.report.normalized && *r.report.normalized < best) {
      best = *r.report.normalized;
      best_alpha = r.alpha;
    }
  }
  const bool u_shape = has_u_shape(rows);

  // Coarser look below the tested range, reported for context only.
  const auto lower = harness::alpha_sweep(base, {0.0, 0.1, 0.2}, options.seeds);
  std::string lower_text;
  for (const auto& r : lower) {
    lower_text += (lower_text.empty() ? "" : " ") + fmt(r.alpha, 2) + ":" +
                  (r.report.normalized ? fmt(*r.report.normalized, 4) : std::string("n/a"));
  }
  Outcome out;
  out.pass = best <= 1.5 && u_shape;
  out.detail = "min normalized cost " + fmt(best, 4) + " at alpha " + fmt(best_alpha, 3) + ", U-shape " +
               (u_shape ? "present" : "absent (no decrease within 0.30-0.90)") + "; below range " + lower_text;
  return out;
}

Outcome grid_and_pendulum() {
  SimConfig grid;
  grid.scenario = "grid9";
  grid.steps = 500;
  grid.seed = kSuiteSeed;
  grid.horizon = 2;
  grid.algorithm = Algorithm::HHorizon;
  const auto hh = harness::simulate(grid);
  grid.algorithm = Algorithm::CocoLQPredict;
  grid.alpha = 0.3;
  const auto pred = harness::simulate(grid);
  const bool grid_ok = hh.report.sup_state_norm > 1e3 && !pred.trajectory.terminated &&
                       pred.report.sup_state_norm < 1e3;

  SimConfig pend;
  pend.scenario = "pendulum";
  pend.steps = 1000;
  pend.seed = kSuiteSeed;
  pend.alpha = 0.4;
  pend.fallback = control::RelaxAlpha{};
  const auto coco = harness::simulate(pend);
  pend.algorithm = Algorithm::NaiveLTI;
  pend.fallback.reset();
  const auto naive = harness::simulate(pend);
  auto reach = [](const harness::Trajectory& tr) {
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      if (tr.states[t].norm() < 0.05) {
        return static_cast<int>(t);
      }
    }
    return -1;
  };
  const int coco_reach = reach(coco.trajectory);
  const int naive_reach = reach(naive.trajectory);
  const double naive_final = naive.trajectory.states.back().norm();
  const bool pend_ok = coco_reach >= 0 && !coco.trajectory.terminated && naive_reach < 0;
  Outcome out;
  out.pass = grid_ok && pend_ok;
  out.detail = "grid9 sup||x|| h-horizon " + fmt(hh.report.sup_state_norm, 4) + " vs coco-lq-predict " +
               fmt(pred.report.sup_state_norm, 4) + (grid_ok ? "" : " (h-horizon did not diverge)") +
               "; pendulum coco-lq reaches ||x||<0.05 at t=" + std::to_string(coco_reach) +
               ", naive " + (naive_reach < 0 ? "never (final ||x||=" + fmt(naive_final, 4) + ")"
                                             : "at t=" + std::to_string(naive_reach));
  return out;
}

struct Entry {
  int id;
  const char* name;
};

constexpr Entry kEntries[] = {
    {1, "dare-sdp-equivalence"}, {2, "feasibility"},          {3, "sequential-stability"},
    {4, "iss-envelope"},          {5, "naive-instability"},    {6, "adversary-lower-bound"},
    {7, "prediction-rescue"},     {8, "estimation-robustness"}, {9, "cost-behavior"},
    {10, "grid-and-pendulum"},
};

}  // namespace

std::vector<int> criterion_ids() {
  std::vector<int> ids;
  for (const auto& e : kEntries) {
    ids.push_back(e.id);
  }
  return ids;
}

CriterionResult run_criterion(int id, const SuiteOptions& options) {
  const Entry* entry = nullptr;
  for (const auto& e : kEntries) {
    if (e.id == id) {
      entry = &e;
    }
  }
  if (!entry) {
    throw InvalidInput("unknown acceptance criterion " + std::to_string(id));
  }
  CriterionResult result;
  result.id = id;
  result.name = entry->name;
  const auto start = std::chrono::steady_clock::now();
  Outcome outcome;
  try {
    switch (id) {
      case 1: outcome = dare_equivalence(); break;
      case 2: outcome = feasibility(); break;
      case 3: outcome = sequential_stability(options); break;
      case 4: outcome = iss_envelope(options.seeds); break;
      case 5: outcome = naive_instability(options.seeds); break;
      case 6: outcome = adversary(); break;
      case 7: outcome = prediction_rescue(options.seeds); break;
      case 8: outcome = estimation_robustness(options.seeds); break;
      case 9: outcome = cost_behavior(options); break;
      case 10: outcome = grid_and_pendulum(); break;
      default: break;
    }
  } catch (const Error& e) {
    outcome = {false, "error kind=" + e.kind() + ": " + e.what()};
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.pass = outcome.pass;
  result.detail = outcome.detail;
  return result;
}

std::vector<CriterionResult> run_suite(const SuiteOptions& options) {
  std::vector<CriterionResult> out;
  for (int id : criterion_ids()) {
    out.push_back(run_criterion(id, options));
  }
  return out;
}

std::string format_line(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.pass ? "[PASS] " : "[FAIL] ") << r.id << ' ' << r.name << " (" << std::fixed << std::setprecision(2)
     << r.seconds << " s): " << r.detail;
  return os.str();
}

}  // namespace coco::bench

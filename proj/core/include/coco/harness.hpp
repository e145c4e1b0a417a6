#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coco/controller.hpp"
#include "coco/scenarios.hpp"
#include "coco/stability.hpp"
#include "coco/types.hpp"

namespace coco::harness {

enum class Algorithm { CocoLQ, CocoLQPredict, NaiveLTI, HHorizon, OfflineOptimal };
enum class NoiseKind { Gaussian, TruncatedGaussian, Zero };

/// What to do when a controller cannot produce a gain at some step.
enum class FailurePolicy {
  Terminate,    // stop the run, recording the failing step
  ZeroControl,  // apply u = 0 and continue
};

const char* to_string(Algorithm a);
const char* to_string(NoiseKind n);
const char* to_string(FailurePolicy f);
Algorithm parse_algorithm(const std::string& s);
NoiseKind parse_noise(const std::string& s);
FailurePolicy parse_failure_policy(const std::string& s);

struct SimConfig {
  std::string scenario = "switching";
  scenarios::Params params;  // scenario parameters, e.g. rho, a, perturb

  Algorithm algorithm = Algorithm::CocoLQ;
  double alpha = 0.4;
  std::optional<control::RelaxAlpha> fallback;
  int horizon = 1;             // CocoLQPredict and HHorizon
  bool receding = false;       // HHorizon: replan every step instead of per block
  sdp::Settings solver;

  int steps = 500;
  std::uint64_t seed = 0;
  NoiseKind noise = NoiseKind::Gaussian;
  std::optional<double> noise_std;  // per-component; scenario default when unset
  double noise_cap = 3.0;           // TruncatedGaussian: |w_i| <= cap * std

  std::optional<Vector> x0;
  std::optional<double> q;  // Q = q I; scenario default when unset
  std::optional<double> r;  // R = r I

  FailurePolicy on_failure = FailurePolicy::Terminate;
  double divergence_limit = 1e12;  // stop once ||x_t|| exceeds this
  bool normalize = false;          // also run OfflineOptimal on the same noise
};

/// Raises ConfigError on out-of-range values.
void validate(const SimConfig& config);

struct StepRow {
  int t = 0;
  Vector x;
  Vector u;
  Vector w;
  double stage_cost = 0.0;
  std::string status;  // feasible, fallback, infeasible, failed
  double alpha_used = 0.0;
};

struct Trajectory {
  int state_dim = 0;
  int input_dim = 0;
  std::vector<StepRow> rows;
  std::vector<Vector> states;  // x_0 .. x_n, one more than rows when the run completed
  // Per-step closed-loop data for CocoLQ runs with an Ok step, for certification.
  std::vector<stability::StepInput> certificates;
  SymMatrix certificate_W;  // noise covariance the certificates refer to (lifted for CocoLQPredict)
  bool terminated = false;
  bool diverged = false;
  std::string failure;  // reason when terminated
};

struct CostReport {
  double avg_cost = 0.0;
  std::optional<double> normalized;  // avg_cost / offline-optimal avg_cost
  double sup_state_norm = 0.0;
  double sup_noise_norm = 0.0;
  int steps_completed = 0;
  bool terminated = false;
  bool diverged = false;
};

struct RunResult {
  Trajectory trajectory;
  CostReport report;
};

/// Resolved cost matrices and start state for a config.
struct Setup {
  scenarios::Provider provider;
  control::Cost cost;  // Q, R and the controller's noise model W
  double noise_std = 0.0;
  Vector noise_shape;  // w_i = noise_std * noise_shape_i * z_i
  Vector x0;
};

Setup resolve(const SimConfig& config);

/// Noise w_t for a run; depends only on (seed, t), never on the controller.
Vector draw_noise(const SimConfig& config, double noise_std, const Vector& shape, int t);

RunResult simulate(const SimConfig& config);

/// Mean stage cost. Raises InvalidInput on an empty trajectory.
double average_cost(const Trajectory& trajectory, const SymMatrix& Q, const SymMatrix& R);

struct SweepRow {
  double alpha = 0.0;
  CostReport report;  // averaged over seeds
  std::string error;  // non-empty when a run raised
};

/// One run per alpha (per seed) on identical noise, seeds base.seed ..
/// base.seed + seeds - 1. Errors are recorded per row and the sweep continues.
std::vector<SweepRow> alpha_sweep(const SimConfig& base, const std::vector<double>& alphas, int seeds = 1);

/// Recomputes the CocoLQ step at every row of a recorded trajectory and
/// certifies the resulting sequence.
stability::Certificate certify_trajectory(const SimConfig& config, const Trajectory& trajectory,
                                          std::vector<sdp::Problem>* failing_problems = nullptr);

using KeyValues = std::map<std::string, std::string>;

/// Flat `key=value` lines; `#` starts a comment. Raises ConfigError on
/// malformed lines.
KeyValues read_key_values(std::istream& is);
void write_key_values(std::ostream& os, const KeyValues& kv);

/// Applies keys named like the CLI flags (scenario, alg, alpha, horizon, steps,
/// seed, noise, noise-std, noise-cap, fallback, q, r, x0, on-failure, param.<name>).
/// Unknown keys raise ConfigError.
SimConfig apply_key_values(SimConfig config, const KeyValues& kv);
KeyValues to_key_values(const SimConfig& config);

}  // namespace coco::harness

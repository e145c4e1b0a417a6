#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "coco/types.hpp"

namespace coco::scenarios {

/// Realized trajectory so far: xs = x_0..x_t, us = u_0..u_{t-1}.
struct History {
  std::vector<Vector> xs;
  std::vector<Vector> us;
};

/// Cost and start-state defaults a scenario suggests to the harness.
struct Defaults {
  Vector x0;
  double q = 0.2;        // Q = q I
  double r = 1.0;        // R = r I
  double noise_std = 0.1;  // W = noise_std^2 diag(noise_shape)^2
  Vector noise_shape;      // per-component std multipliers; empty means all ones
};

class SystemProvider {
 public:
  virtual ~SystemProvider() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;

  /// Whether A_t may depend on realized states or controls.
  virtual bool adaptive() const { return false; }

  /// Model handed to the controller at time t.
  virtual Dynamics next(int t, const History& history) const = 0;

  /// Model the plant actually follows (differs from next() under perturbation).
  virtual Dynamics truth(int t, const History& history) const { return next(t, history); }

  /// Plant update; linear in the true model unless overridden.
  virtual Vector advance(int t, const Vector& x, const Vector& u, const Vector& w, const History& history) const;

  /// Controller models for s = t..t+H-1. Adaptive providers refuse with
  /// InvalidInput.
  virtual std::vector<Dynamics> prediction_window(int t, int H) const;

  virtual Defaults defaults() const;
};

using Provider = std::shared_ptr<const SystemProvider>;

/// A_t alternates A = [[rho, a], [0, rho]] (even t, starting at t = 0) and
/// A' = [[rho, 0], [a, rho]] (odd t); B = I.
Provider switching(double rho = 0.99, double a = 1.5);

/// A_t = [[0.99, |sin(pi t/2)| e^{t/60}], [|cos(pi t/2)| e^{t/60}, 0.99]], B = I.
Provider sinusoid();

struct GridParams {
  double m_low = 2.0;
  double m_high = 8.0;
  double fluct_low = 0.0;
  double fluct_high = 0.2;
  SymMatrix D = SymMatrix::Identity(3, 3);  // damping
  SymMatrix L;                              // susceptance Laplacian; empty means 3-ring, unit lines
  double dt = 0.01;
  int period = 200;         // inertia schedule period in steps
  double high_fraction = 0.5;  // share of each period at m_high
  std::uint64_t seed = 0;
};

/// Swing-equation model with states (angles, frequencies) and injected power
/// as input, discretized by forward Euler.
Provider grid9(const GridParams& params = {});

/// Euler-discretized pendulum; the controller sees the linearization at the
/// realized angle, the plant integrates the nonlinear dynamics.
Provider pendulum(double g = 9.81, double l = 1.0, double m = 1.0, double dt = 0.01);

/// Adaptive adversary with B = e_1: A_{2k} = I and A_{2k+1} = [[1,0],[eps,2]]
/// with eps chosen from x_{2k} and the sign of u_{2k}.
Provider adversarial_rank_deficient();

/// Certified lower bound 1.5^k on x_{2k,2} for the adversary started at [1,1].
double adversary_lower_bound(int k);

/// Non-adaptive version of the adversary's matrices with a fixed eps.
Provider rank_deficient_pair(double eps = 0.5);

/// Controller sees truth plus seeded perturbations whose spectral norms equal
/// `error_norm` exactly; the plant keeps the truth.
Provider perturb(Provider base, double error_norm, std::uint64_t seed);

using Params = std::map<std::string, double>;

/// Builds a registered scenario by name: switching, sinusoid, grid9,
/// pendulum, adversarial, rank-deficient-pair. Raises ConfigError on unknown
/// names or parameters.
Provider make(const std::string& name, const Params& params = {}, std::uint64_t seed = 0);

std::vector<std::string> names();

}  // namespace coco::scenarios

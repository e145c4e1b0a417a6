#include "coco/scenarios.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "coco/linalg.hpp"
#include "coco/rng.hpp"

namespace coco::scenarios {

namespace {

// Stream tags keep the random draws of different consumers independent.
constexpr std::uint64_t kGridStream = 0x67726964;
constexpr std::uint64_t kPerturbAStream = 0x70657241;
constexpr std::uint64_t kPerturbBStream = 0x70657242;

class Switching final : public SystemProvider {
 public:
  Switching(double rho, double a) {
    A_ << rho, a, 0.0, rho;
    A_prime_ << rho, 0.0, a, rho;
  }
  std::string name() const override { return "switching"; }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 2; }
  Dynamics next(int t, const History&) const override {
    return {t % 2 == 0 ? Matrix(A_) : Matrix(A_prime_), Matrix::Identity(2, 2)};
  }

 private:
  Eigen::Matrix2d A_;
  Eigen::Matrix2d A_prime_;
};

class Sinusoid final : public SystemProvider {
 public:
  std::string name() const override { return "sinusoid"; }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 2; }
  Dynamics next(int t, const History&) const override {
    const double growth = std::exp(t / 60.0);
    const double phase = std::numbers::pi * t / 2.0;
    Matrix A(2, 2);
    A << 0.99, std::abs(std::sin(phase)) * growth, std::abs(std::cos(phase)) * growth, 0.99;
    return {A, Matrix::Identity(2, 2)};
  }
};

SymMatrix ring_laplacian(int n, double susceptance) {
  SymMatrix L = SymMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const int j = (i + 1) % n;
    L(i, i) += susceptance;
    L(j, j) += susceptance;
    L(i, j) -= susceptance;
    L(j, i) -= susceptance;
  }
  return L;
}

class Grid final : public SystemProvider {
 public:
  explicit Grid(GridParams params) : p_(std::move(params)) {
    if (p_.L.size() == 0) {
      p_.L = ring_laplacian(3, 1.0);
    }
    const auto n = p_.D.rows();
    if (n < 1 || p_.D.cols() != n || p_.L.rows() != n || p_.L.cols() != n) {
      throw ConfigError("grid9: D and L must be square and of equal size");
    }
    if (!(p_.m_low > 0.0) || !(p_.m_high > 0.0) || !(p_.dt > 0.0) || p_.period < 1 ||
        !(p_.fluct_low <= p_.fluct_high) || p_.fluct_low + std::min(p_.m_low, p_.m_high) <= 0.0 ||
        !(p_.high_fraction >= 0.0 && p_.high_fraction <= 1.0)) {
      throw ConfigError("grid9: inertias, dt and period must be positive");
    }
    if ((p_.L - p_.L.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
        p_.L.rowwise().sum().cwiseAbs().maxCoeff() > 1e-9) {
      throw ConfigError("grid9: L must be symmetric with zero row sums");
    }
    for (double m : {p_.m_low + p_.fluct_low, p_.m_high + p_.fluct_high}) {
      const double norm = linalg::spectral_norm(discretize(Vector::Constant(n, m)).A);
      if (norm > 1e3) {
        std::ostringstream os;
        os << "grid9: dt = " << p_.dt << " gives ||A_d|| = " << norm << " > 1e3";
        throw ConfigError(os.str());
      }
    }
  }

  std::string name() const override { return "grid9"; }
  int state_dim() const override { return 2 * static_cast<int>(p_.D.rows()); }
  int input_dim() const override { return static_cast<int>(p_.D.rows()); }

  Dynamics next(int t, const History&) const override { return discretize(inertia(t)); }

  Vector inertia(int t) const {
    const auto n = p_.D.rows();
    const int phase = ((t % p_.period) + p_.period) % p_.period;
    const double base = phase < p_.high_fraction * p_.period ? p_.m_high : p_.m_low;
    auto rng = stream_rng(p_.seed, kGridStream, static_cast<std::uint64_t>(t));
    std::uniform_real_distribution<double> fluct(p_.fluct_low, p_.fluct_high);
    Vector m(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      m(i) = base + fluct(rng);
    }
    return m;
  }

  Dynamics discretize(const Vector& m) const {
    const auto n = p_.D.rows();
    const Vector minv = m.cwiseInverse();
    Matrix Ac = Matrix::Zero(2 * n, 2 * n);
    Ac.topRightCorner(n, n) = Matrix::Identity(n, n);
    Ac.bottomLeftCorner(n, n) = -(minv.asDiagonal() * p_.L);
    Ac.bottomRightCorner(n, n) = -(minv.asDiagonal() * p_.D);
    Matrix Bc = Matrix::Zero(2 * n, n);
    Bc.bottomRows(n) = minv.asDiagonal();
    return {Matrix::Identity(2 * n, 2 * n) + p_.dt * Ac, p_.dt * Bc};
  }

  Defaults defaults() const override {
    Defaults d;
    d.x0 = Vector::Ones(state_dim());
    return d;
  }

 private:
  GridParams p_;
};

class Pendulum final : public SystemProvider {
 public:
  Pendulum(double g, double l, double m, double dt, double theta0)
      : g_(g), l_(l), m_(m), dt_(dt), theta0_(theta0) {
    if (!(g > 0.0 && l > 0.0 && m > 0.0 && dt > 0.0)) {
      throw ConfigError("pendulum: g, l, m and dt must be positive");
    }
  }
  std::string name() const override { return "pendulum"; }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 1; }
  bool adaptive() const override { return true; }

  Dynamics next(int t, const History& history) const override {
    const double theta = angle_at(t, history);
    Matrix A(2, 2);
    A << 1.0, dt_, dt_ * (g_ / l_) * std::cos(theta), 1.0;
    Matrix B(2, 1);
    B << 0.0, dt_ / (m_ * l_ * l_);
    return {A, B};
  }

  Vector advance(int, const Vector& x, const Vector& u, const Vector& w, const History&) const override {
    Vector out(2);
    out(0) = x(0) + dt_ * x(1);
    out(1) = x(1) + dt_ * ((g_ / l_) * std::sin(x(0)) + u(0) / (m_ * l_ * l_));
    return out + w;
  }

  Defaults defaults() const override {
    Defaults d;
    d.x0 = Vector(2);
    d.x0 << theta0_, 0.0;
    d.q = 1.0;
    d.r = 1.0;
    d.noise_std = 1e-3;
    // Disturbance torque enters through the velocity; the angle sees it one
    // step later, scaled by dt.
    d.noise_shape = Vector(2);
    d.noise_shape << dt_, 1.0;
    return d;
  }

 private:
  double angle_at(int t, const History& history) const {
    if (t < 0 || static_cast<std::size_t>(t) >= history.xs.size()) {
      throw InvalidInput("pendulum: history does not contain x_t");
    }
    return history.xs[static_cast<std::size_t>(t)](0);
  }

  double g_;
  double l_;
  double m_;
  double dt_;
  double theta0_;
};

Matrix odd_step_matrix(double eps) {
  Matrix A(2, 2);
  A << 1.0, 0.0, eps, 2.0;
  return A;
}

Matrix first_axis() {
  Matrix B(2, 1);
  B << 1.0, 0.0;
  return B;
}

class Adversary final : public SystemProvider {
 public:
  std::string name() const override { return "adversarial"; }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 1; }
  bool adaptive() const override { return true; }

  Dynamics next(int t, const History& history) const override {
    if (t % 2 == 0) {
      return {Matrix::Identity(2, 2), first_axis()};
    }
    const auto k2 = static_cast<std::size_t>(t - 1);
    if (history.xs.size() <= k2 || history.us.size() <= k2) {
      throw InvalidInput("adversarial: odd step needs x_{2k} and u_{2k}");
    }
    const Vector& x = history.xs[k2];
    const double u = history.us[k2](0);
    const double sign = u > 0.0 ? 1.0 : (u < 0.0 ? -1.0 : 0.0);
    const double eps = 0.5 * std::abs(x(1)) / std::max(std::abs(x(0)), 1.0) * sign;
    return {odd_step_matrix(eps), first_axis()};
  }

  Defaults defaults() const override {
    Defaults d;
    d.x0 = Vector::Ones(2);
    d.noise_std = 0.0;
    return d;
  }
};

class RankDeficientPair final : public SystemProvider {
 public:
  explicit RankDeficientPair(double eps) : eps_(eps) {}
  std::string name() const override { return "rank-deficient-pair"; }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 1; }
  Dynamics next(int t, const History&) const override {
    return {t % 2 == 0 ? Matrix(Matrix::Identity(2, 2)) : odd_step_matrix(eps_), first_axis()};
  }

 private:
  double eps_;
};

Matrix scaled_gaussian(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double norm) {
  if (norm == 0.0) {
    return Matrix::Zero(rows, cols);
  }
  std::normal_distribution<double> n01;
  Matrix G(rows, cols);
  for (Eigen::Index i = 0; i < G.size(); ++i) {
    G.data()[i] = n01(rng);
  }
  return G * (norm / linalg::spectral_norm(G));
}

class Perturbed final : public SystemProvider {
 public:
  Perturbed(Provider base, double error_norm, std::uint64_t seed)
      : base_(std::move(base)), error_norm_(error_norm), seed_(seed) {
    if (!base_) {
      throw InvalidInput("perturb: null provider");
    }
    if (base_->adaptive()) {
      throw InvalidInput("perturb: base provider must be non-adaptive");
    }
    if (!(error_norm >= 0.0) || !std::isfinite(error_norm)) {
      throw InvalidInput("perturb: error_norm must be finite and >= 0");
    }
  }
  std::string name() const override { return base_->name() + "+perturbed"; }
  int state_dim() const override { return base_->state_dim(); }
  int input_dim() const override { return base_->input_dim(); }

  Dynamics next(int t, const History& history) const override {
    Dynamics d = base_->next(t, history);
    if (error_norm_ == 0.0) {
      return d;
    }
    auto ra = stream_rng(seed_, kPerturbAStream, static_cast<std::uint64_t>(t));
    auto rb = stream_rng(seed_, kPerturbBStream, static_cast<std::uint64_t>(t));
    d.A += scaled_gaussian(ra, d.A.rows(), d.A.cols(), error_norm_);
    d.B += scaled_gaussian(rb, d.B.rows(), d.B.cols(), error_norm_);
    return d;
  }
  Dynamics truth(int t, const History& history) const override { return base_->truth(t, history); }
  Vector advance(int t, const Vector& x, const Vector& u, const Vector& w, const History& history) const override {
    return base_->advance(t, x, u, w, history);
  }
  Defaults defaults() const override { return base_->defaults(); }

 private:
  Provider base_;
  double error_norm_;
  std::uint64_t seed_;
};

double take(Params& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) {
    return fallback;
  }
  const double v = it->second;
  params.erase(it);
  return v;
}

}  // namespace

Vector SystemProvider::advance(int t, const Vector& x, const Vector& u, const Vector& w,
                               const History& history) const {
  const Dynamics d = truth(t, history);
  return d.A * x + d.B * u + w;
}

std::vector<Dynamics> SystemProvider::prediction_window(int t, int H) const {
  if (adaptive()) {
    throw InvalidInput(name() + ": adaptive provider cannot supply predictions");
  }
  if (H < 1) {
    throw InvalidInput("prediction_window: H must be >= 1");
  }
  std::vector<Dynamics> out;
  const History empty;
  for (int s = 0; s < H; ++s) {
    out.push_back(next(t + s, empty));
  }
  return out;
}

Defaults SystemProvider::defaults() const {
  Defaults d;
  d.x0 = Vector::Ones(state_dim());
  return d;
}

Provider switching(double rho, double a) { return std::make_shared<Switching>(rho, a); }

Provider sinusoid() { return std::make_shared<Sinusoid>(); }

Provider grid9(const GridParams& params) { return std::make_shared<Grid>(params); }

Provider pendulum(double g, double l, double m, double dt) {
  return std::make_shared<Pendulum>(g, l, m, dt, 1.2);
}

Provider adversarial_rank_deficient() { return std::make_shared<Adversary>(); }

double adversary_lower_bound(int k) { return std::pow(1.5, k); }

Provider rank_deficient_pair(double eps) { return std::make_shared<RankDeficientPair>(eps); }

Provider perturb(Provider base, double error_norm, std::uint64_t seed) {
  return std::make_shared<Perturbed>(std::move(base), error_norm, seed);
}

std::vector<std::string> names() {
  return {"switching", "sinusoid", "grid9", "pendulum", "adversarial", "rank-deficient-pair"};
}

Provider make(const std::string& name, const Params& params_in, std::uint64_t seed) {
  Params params = params_in;
  const double perturbation = take(params, "perturb", 0.0);
  Provider provider;
  if (name == "switching") {
    const double rho = take(params, "rho", 0.99);
    const double a = take(params, "a", 1.5);
    provider = switching(rho, a);
  } else if (name == "sinusoid") {
    provider = sinusoid();
  } else if (name == "grid9") {
    GridParams gp;
    gp.m_low = take(params, "m_low", gp.m_low);
    gp.m_high = take(params, "m_high", gp.m_high);
    gp.fluct_low = take(params, "fluct_low", gp.fluct_low);
    gp.fluct_high = take(params, "fluct_high", gp.fluct_high);
    gp.dt = take(params, "dt", gp.dt);
    gp.period = static_cast<int>(take(params, "period", gp.period));
    gp.high_fraction = take(params, "high_fraction", gp.high_fraction);
    gp.D = take(params, "damping", 1.0) * SymMatrix::Identity(3, 3);
    gp.L = ring_laplacian(3, take(params, "susceptance", 1.0));
    gp.seed = seed;
    provider = grid9(gp);
  } else if (name == "pendulum") {
    const double g = take(params, "g", 9.81);
    const double l = take(params, "l", 1.0);
    const double m = take(params, "m", 1.0);
    const double dt = take(params, "dt", 0.01);
    const double theta0 = take(params, "theta0", 1.2);
    provider = std::make_shared<Pendulum>(g, l, m, dt, theta0);
  } else if (name == "adversarial") {
    provider = adversarial_rank_deficient();
  } else if (name == "rank-deficient-pair") {
    provider = rank_deficient_pair(take(params, "eps", 0.5));
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }
  if (!params.empty()) {
    throw ConfigError("scenario '" + name + "' does not take parameter '" + params.begin()->first + "'");
  }
  if (perturbation > 0.0) {
    provider = perturb(provider, perturbation, seed);
  }
  return provider;
}

}  // namespace coco::scenarios

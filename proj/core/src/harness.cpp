#include "coco/harness.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "coco/baselines.hpp"
#include "coco/linalg.hpp"
#include "coco/rng.hpp"

namespace coco::harness {

namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365;

double parse_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != std::floor(v) || std::abs(v) > 9e15) {
    throw ConfigError("'" + key + "' expects an integer, got '" + value + "'");
  }
  return static_cast<long long>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") {
    return true;
  }
  if (value == "0" || value == "false" || value == "off" || value == "no") {
    return false;
  }
  throw ConfigError("'" + key + "' expects a boolean, got '" + value + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(std::numeric_limits<double>::max_digits10);
  os << v;
  return os.str();
}

double quad(const Vector& v, const SymMatrix& M) { return v.dot(M * v); }

struct Controller {
  const SimConfig& config;
  const Setup& setup;
  const scenarios::SystemProvider& provider;
  Trajectory& trajectory;

  std::vector<Matrix> gains;  // OfflineOptimal and blockwise HHorizon
  std::optional<control::PredictStep> plan;
  bool plan_failed = false;
  std::string plan_failure;
  Vector block_start_state;
  bool certificate_w_set = false;

  struct Decision {
    Vector u;
    std::string status = "feasible";
    double alpha_used = 0.0;
    bool failed = false;
    std::string reason;
  };

  Decision decide(int t, const scenarios::History& history) {
    const Vector& x = history.xs.back();
    const int p = provider.input_dim();
    Decision out;
    out.u = Vector::Zero(p);
    const control::CocoConfig coco{config.alpha, config.fallback, config.solver};
    switch (config.algorithm) {
      case Algorithm::CocoLQ: {
        const Dynamics dyn = provider.next(t, history);
        const control::PolicyStep step = control::coco_step(dyn.A, dyn.B, setup.cost, coco);
        out.alpha_used = step.alpha_used;
        if (step.status != control::StepStatus::Ok) {
          out.failed = true;
          out.status = step.status == control::StepStatus::InfeasibleAtAlpha ? "infeasible" : "failed";
          out.reason = std::string("step ") + control::to_string(step.status) + " (sdp " +
                       sdp::to_string(step.sdp_status) + ")";
          return out;
        }
        out.u = step.K * x;
        out.status = step.alpha_used != config.alpha ? "fallback" : "feasible";
        trajectory.certificates.push_back({dyn.A, dyn.B, step.K, step.sigma_xx});
        return out;
      }
      case Algorithm::CocoLQPredict: {
        const int offset = t % config.horizon;
        if (offset == 0) {
          block_start_state = x;
          plan.reset();
          plan_failed = false;
          try {
            const auto window = provider.prediction_window(t, config.horizon);
            control::PredictStep next = control::coco_predict_step(window, setup.cost, coco);
            if (next.policy.status == control::StepStatus::Ok) {
              trajectory.certificates.push_back(
                  {next.lifted.A_tilde, next.lifted.B_tilde, next.policy.K, next.policy.sigma_xx});
              if (!certificate_w_set) {
                trajectory.certificate_W = next.lifted.W_tilde;
                certificate_w_set = true;
              }
              plan = std::move(next);
            } else {
              plan_failed = true;
              plan_failure = std::string("lifted step ") + control::to_string(next.policy.status);
              out.alpha_used = next.policy.alpha_used;
            }
          } catch (const Error& e) {
            plan_failed = true;
            plan_failure = e.kind() + ": " + e.what();
          }
        }
        if (plan_failed || !plan) {
          out.failed = true;
          out.status = "infeasible";
          out.reason = plan_failure;
          return out;
        }
        out.alpha_used = plan->policy.alpha_used;
        out.status = plan->policy.alpha_used != config.alpha ? "fallback" : "feasible";
        out.u = plan->planned_control(block_start_state, offset);
        return out;
      }
      case Algorithm::NaiveLTI: {
        const Dynamics dyn = provider.next(t, history);
        out.u = baselines::naive_lti_step(dyn.A, dyn.B, setup.cost.Q, setup.cost.R) * x;
        return out;
      }
      case Algorithm::HHorizon: {
        if (config.receding) {
          out.u = baselines::h_horizon_step(provider.prediction_window(t, config.horizon), setup.cost.Q,
                                            setup.cost.R)
                      .front() *
                  x;
          return out;
        }
        if (t % config.horizon == 0) {
          gains = baselines::h_horizon_step(provider.prediction_window(t, config.horizon), setup.cost.Q,
                                            setup.cost.R);
        }
        out.u = gains[static_cast<std::size_t>(t % config.horizon)] * x;
        return out;
      }
      case Algorithm::OfflineOptimal:
        out.u = gains[static_cast<std::size_t>(t)] * x;
        return out;
    }
    return out;
  }
};

bool needs_predictions(Algorithm a) {
  return a == Algorithm::CocoLQPredict || a == Algorithm::HHorizon || a == Algorithm::OfflineOptimal;
}

}  // namespace

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::CocoLQ: return "coco-lq";
    case Algorithm::CocoLQPredict: return "coco-lq-predict";
    case Algorithm::NaiveLTI: return "naive-lti";
    case Algorithm::HHorizon: return "h-horizon";
    case Algorithm::OfflineOptimal: return "offline-optimal";
  }
  return "?";
}

const char* to_string(NoiseKind n) {
  switch (n) {
    case NoiseKind::Gaussian: return "gaussian";
    case NoiseKind::TruncatedGaussian: return "truncated";
    case NoiseKind::Zero: return "zero";
  }
  return "?";
}

const char* to_string(FailurePolicy f) {
  return f == FailurePolicy::Terminate ? "terminate" : "zero-control";
}

Algorithm parse_algorithm(const std::string& s) {
  for (Algorithm a : {Algorithm::CocoLQ, Algorithm::CocoLQPredict, Algorithm::NaiveLTI, Algorithm::HHorizon,
                      Algorithm::OfflineOptimal}) {
    if (s == to_string(a)) {
      return a;
    }
  }
  throw ConfigError("unknown algorithm '" + s + "'");
}

NoiseKind parse_noise(const std::string& s) {
  for (NoiseKind n : {NoiseKind::Gaussian, NoiseKind::TruncatedGaussian, NoiseKind::Zero}) {
    if (s == to_string(n)) {
      return n;
    }
  }
  throw ConfigError("unknown noise kind '" + s + "'");
}

FailurePolicy parse_failure_policy(const std::string& s) {
  if (s == "terminate") {
    return FailurePolicy::Terminate;
  }
  if (s == "zero-control") {
    return FailurePolicy::ZeroControl;
  }
  throw ConfigError("unknown failure policy '" + s + "'");
}

void validate(const SimConfig& c) {
  if (c.steps < 1) {
    throw ConfigError("steps must be >= 1");
  }
  if (!(c.alpha >= 0.0 && c.alpha < 1.0)) {
    throw ConfigError("alpha must lie in [0, 1), got " + format_double(c.alpha));
  }
  if (c.horizon < 1) {
    throw ConfigError("horizon must be >= 1");
  }
  if (c.noise == NoiseKind::TruncatedGaussian && !(c.noise_cap > 0.0)) {
    throw ConfigError("noise-cap must be > 0 for truncated noise");
  }
  if (c.noise_std && !(*c.noise_std >= 0.0 && std::isfinite(*c.noise_std))) {
    throw ConfigError("noise-std must be finite and >= 0");
  }
  if (c.q && !(*c.q >= 0.0)) {
    throw ConfigError("q must be >= 0");
  }
  if (c.r && !(*c.r > 0.0)) {
    throw ConfigError("r must be > 0");
  }
  if (c.fallback && !(c.fallback->max_alpha > 0.0 && c.fallback->max_alpha < 1.0 &&
                      c.fallback->growth >= 0.0 && c.fallback->growth < 1.0)) {
    throw ConfigError("fallback needs max_alpha in (0, 1) and growth in [0, 1)");
  }
  if (!(c.divergence_limit > 0.0)) {
    throw ConfigError("divergence limit must be > 0");
  }
}

Setup resolve(const SimConfig& config) {
  Setup s;
  s.provider = scenarios::make(config.scenario, config.params, config.seed);
  const scenarios::Defaults defaults = s.provider->defaults();
  const int d = s.provider->state_dim();
  const int p = s.provider->input_dim();
  const double q = config.q.value_or(defaults.q);
  const double r = config.r.value_or(defaults.r);
  const double model_std = config.noise_std.value_or(defaults.noise_std);
  s.noise_std = config.noise == NoiseKind::Zero ? 0.0 : model_std;
  // The controller's noise model must be PD; only its shape matters to the gain.
  const double w = model_std > 0.0 ? model_std * model_std : 1.0;
  s.cost.Q = q * SymMatrix::Identity(d, d);
  s.cost.R = r * SymMatrix::Identity(p, p);
  s.noise_shape = defaults.noise_shape.size() == 0 ? Vector(Vector::Ones(d)) : defaults.noise_shape;
  if (s.noise_shape.size() != d || !(s.noise_shape.minCoeff() > 0.0)) {
    throw ConfigError("scenario noise shape must have " + std::to_string(d) + " positive entries");
  }
  s.cost.W = w * SymMatrix(s.noise_shape.cwiseAbs2().asDiagonal());
  s.x0 = config.x0.value_or(defaults.x0);
  if (s.x0.size() != d) {
    throw ConfigError("x0 has " + std::to_string(s.x0.size()) + " entries, scenario needs " + std::to_string(d));
  }
  return s;
}

Vector draw_noise(const SimConfig& config, double noise_std, const Vector& shape, int t) {
  const auto dim = shape.size();
  Vector w = Vector::Zero(dim);
  if (config.noise == NoiseKind::Zero || noise_std == 0.0) {
    return w;
  }
  auto rng = stream_rng(config.seed, kNoiseStream, static_cast<std::uint64_t>(t));
  std::normal_distribution<double> n01;
  for (Eigen::Index i = 0; i < dim; ++i) {
    double z = n01(rng);
    if (config.noise == NoiseKind::TruncatedGaussian) {
      while (std::abs(z) > config.noise_cap) {
        z = n01(rng);
      }
    }
    w(i) = noise_std * shape(i) * z;
  }
  return w;
}

RunResult simulate(const SimConfig& config) {
  validate(config);
  const Setup setup = resolve(config);
  const auto& provider = *setup.provider;
  if (needs_predictions(config.algorithm) && provider.adaptive()) {
    throw InvalidInput(std::string(to_string(config.algorithm)) + " needs predictions, but scenario '" +
                       provider.name() + "' is adaptive");
  }

  RunResult result;
  Trajectory& tr = result.trajectory;
  tr.state_dim = provider.state_dim();
  tr.input_dim = provider.input_dim();
  tr.certificate_W = setup.cost.W;
  tr.states.push_back(setup.x0);

  Controller controller{config, setup, provider, tr, {}, std::nullopt, false, {}, {}, false};
  if (config.algorithm == Algorithm::OfflineOptimal) {
    std::vector<Dynamics> sequence;
    const scenarios::History empty;
    for (int t = 0; t < config.steps; ++t) {
      sequence.push_back(provider.truth(t, empty));
    }
    controller.gains = baselines::offline_optimal(sequence, setup.cost.Q, setup.cost.R);
  }

  scenarios::History history;
  history.xs.push_back(setup.x0);
  for (int t = 0; t < config.steps; ++t) {
    const Vector x = history.xs.back();
    Controller::Decision decision;
    try {
      decision = controller.decide(t, history);
    } catch (const Error& e) {
      decision = {};
      decision.u = Vector::Zero(tr.input_dim);
      decision.failed = true;
      decision.status = "failed";
      decision.reason = e.kind() + ": " + e.what();
    }
    if (decision.failed) {
      decision.u.setZero();
    }
    StepRow row;
    row.t = t;
    row.x = x;
    row.u = decision.u;
    row.w = draw_noise(config, setup.noise_std, setup.noise_shape, t);
    row.stage_cost = quad(x, setup.cost.Q) + quad(decision.u, setup.cost.R);
    row.status = decision.status;
    row.alpha_used = decision.alpha_used;
    tr.rows.push_back(row);
    if (decision.failed && config.on_failure == FailurePolicy::Terminate) {
      tr.terminated = true;
      tr.failure = "t=" + std::to_string(t) + ": " + decision.reason;
      break;
    }
    const Vector next = provider.advance(t, x, row.u, row.w, history);
    history.us.push_back(row.u);
    history.xs.push_back(next);
    tr.states.push_back(next);
    if (!linalg::all_finite(next) || next.norm() > config.divergence_limit) {
      tr.terminated = true;
      tr.diverged = true;
      tr.failure = "t=" + std::to_string(t + 1) + ": state norm exceeded divergence limit";
      break;
    }
  }

  CostReport& rep = result.report;
  rep.avg_cost = average_cost(tr, setup.cost.Q, setup.cost.R);
  rep.steps_completed = static_cast<int>(tr.rows.size());
  rep.terminated = tr.terminated;
  rep.diverged = tr.diverged;
  for (const auto& x : tr.states) {
    rep.sup_state_norm = std::max(rep.sup_state_norm, linalg::all_finite(x) ? x.norm()
                                                                            : std::numeric_limits<double>::infinity());
  }
  for (const auto& row : tr.rows) {
    rep.sup_noise_norm = std::max(rep.sup_noise_norm, row.w.norm());
  }
  if (config.normalize && config.algorithm != Algorithm::OfflineOptimal) {
    SimConfig offline = config;
    offline.algorithm = Algorithm::OfflineOptimal;
    offline.normalize = false;
    const CostReport base = simulate(offline).report;
    rep.normalized = rep.diverged ? std::numeric_limits<double>::infinity() : rep.avg_cost / base.avg_cost;
  }
  return result;
}

double average_cost(const Trajectory& trajectory, const SymMatrix& Q, const SymMatrix& R) {
  if (trajectory.rows.empty()) {
    throw InvalidInput("average_cost: empty trajectory");
  }
  double total = 0.0;
  for (const auto& row : trajectory.rows) {
    total += row.x.dot(Q * row.x) + row.u.dot(R * row.u);
  }
  return total / static_cast<double>(trajectory.rows.size());
}

std::vector<SweepRow> alpha_sweep(const SimConfig& base, const std::vector<double>& alphas, int seeds) {
  if (alphas.empty()) {
    throw InvalidInput("alpha_sweep: empty alpha list");
  }
  if (seeds < 1) {
    throw InvalidInput("alpha_sweep: seeds must be >= 1");
  }
  // Offline-optimal reference cost per seed, shared by all alphas.
  std::vector<std::optional<double>> reference(static_cast<std::size_t>(seeds));
  if (base.normalize) {
    for (int s = 0; s < seeds; ++s) {
      SimConfig offline = base;
      offline.seed = base.seed + static_cast<std::uint64_t>(s);
      offline.algorithm = Algorithm::OfflineOptimal;
      offline.normalize = false;
      try {
        reference[static_cast<std::size_t>(s)] = simulate(offline).report.avg_cost;
      } catch (const Error&) {
        reference[static_cast<std::size_t>(s)].reset();
      }
    }
  }

  std::vector<SweepRow> out;
  for (double alpha : alphas) {
    SweepRow row;
    row.alpha = alpha;
    double cost_sum = 0.0;
    double ref_sum = 0.0;
    bool have_ref = base.normalize;
    try {
      for (int s = 0; s < seeds; ++s) {
        SimConfig run = base;
        run.alpha = alpha;
        run.seed = base.seed + static_cast<std::uint64_t>(s);
        run.normalize = false;
        const CostReport rep = simulate(run).report;
        cost_sum += rep.avg_cost;
        row.report.sup_state_norm = std::max(row.report.sup_state_norm, rep.sup_state_norm);
        row.report.sup_noise_norm = std::max(row.report.sup_noise_norm, rep.sup_noise_norm);
        row.report.steps_completed += rep.steps_completed;
        row.report.terminated = row.report.terminated || rep.terminated;
        row.report.diverged = row.report.diverged || rep.diverged;
        const auto& ref = reference[static_cast<std::size_t>(s)];
        if (ref) {
          ref_sum += *ref;
        } else {
          have_ref = false;
        }
      }
      row.report.avg_cost = cost_sum / seeds;
      row.report.steps_completed /= seeds;
      if (have_ref) {
        row.report.normalized =
            row.report.diverged ? std::numeric_limits<double>::infinity() : cost_sum / ref_sum;
      }
    } catch (const Error& e) {
      row.error = e.kind() + ": " + e.what();
    }
    out.push_back(std::move(row));
  }
  return out;
}

stability::Certificate certify_trajectory(const SimConfig& config, const Trajectory& trajectory,
                                          std::vector<sdp::Problem>* failing_problems) {
  validate(config);
  const Setup setup = resolve(config);
  const auto& provider = *setup.provider;
  if (trajectory.state_dim != provider.state_dim() || trajectory.input_dim != provider.input_dim()) {
    throw InvalidInput("certify: trajectory dimensions do not match scenario '" + provider.name() + "'");
  }
  const control::CocoConfig coco{config.alpha, config.fallback, config.solver};
  std::vector<stability::StepInput> inputs;
  std::vector<int> unsolved;
  std::vector<Dynamics> models;
  std::vector<int> solved_t;  // row t of each entry in `inputs`
  scenarios::History history;
  for (const auto& row : trajectory.rows) {
    history.xs.push_back(row.x);
    const Dynamics dyn = provider.next(row.t, history);
    const control::PolicyStep step = control::coco_step(dyn.A, dyn.B, setup.cost, coco);
    if (step.status == control::StepStatus::Ok) {
      inputs.push_back({dyn.A, dyn.B, step.K, step.sigma_xx});
      models.push_back(dyn);
      solved_t.push_back(row.t);
    } else {
      unsolved.push_back(row.t);
      if (failing_problems) {
        failing_problems->push_back(
            control::build_coco_sdp(dyn.A, dyn.B, setup.cost.Q, setup.cost.R, setup.cost.W, config.alpha));
      }
    }
    history.us.push_back(row.u);
  }
  if (inputs.empty()) {
    stability::Certificate cert;
    cert.failing = unsolved;
    cert.pass = false;
    return cert;
  }
  stability::Certificate cert = stability::certify_sequence(inputs, config.alpha, setup.cost.W, 0);
  for (auto& rec : cert.steps) {
    rec.t = solved_t[static_cast<std::size_t>(rec.t)];
  }
  for (int& t : cert.failing) {
    const auto i = static_cast<std::size_t>(t);
    if (failing_problems) {
      failing_problems->push_back(control::build_coco_sdp(models[i].A, models[i].B, setup.cost.Q, setup.cost.R,
                                                          setup.cost.W, config.alpha));
    }
    t = solved_t[i];
  }
  if (!unsolved.empty()) {
    cert.failing.insert(cert.failing.end(), unsolved.begin(), unsolved.end());
    cert.pass = false;
  }
  return cert;
}

KeyValues read_key_values(std::istream& is) {
  KeyValues kv;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line.erase(hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(number) + ": empty key");
    }
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

void write_key_values(std::ostream& os, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    os << key << '=' << value << '\n';
  }
}

SimConfig apply_key_values(SimConfig c, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (key == "scenario") {
      c.scenario = value;
    } else if (key == "alg") {
      c.algorithm = parse_algorithm(value);
    } else if (key == "alpha") {
      c.alpha = parse_double(key, value);
    } else if (key == "horizon") {
      c.horizon = static_cast<int>(parse_integer(key, value));
    } else if (key == "receding") {
      c.receding = parse_bool(key, value);
    } else if (key == "steps") {
      c.steps = static_cast<int>(parse_integer(key, value));
    } else if (key == "seed") {
      const long long s = parse_integer(key, value);
      if (s < 0) {
        throw ConfigError("seed must be >= 0");
      }
      c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "noise") {
      c.noise = parse_noise(value);
    } else if (key == "noise-std") {
      c.noise_std = parse_double(key, value);
    } else if (key == "noise-cap") {
      c.noise_cap = parse_double(key, value);
    } else if (key == "fallback") {
      if (value == "off" || value == "none") {
        c.fallback.reset();
      } else if (value == "on") {
        c.fallback = control::RelaxAlpha{};
      } else {
        control::RelaxAlpha relax;
        relax.max_alpha = parse_double(key, value);
        c.fallback = relax;
      }
    } else if (key == "fallback-growth") {
      if (!c.fallback) {
        c.fallback = control::RelaxAlpha{};
      }
      c.fallback->growth = parse_double(key, value);
    } else if (key == "q") {
      c.q = parse_double(key, value);
    } else if (key == "r") {
      c.r = parse_double(key, value);
    } else if (key == "x0") {
      std::vector<double> entries;
      std::stringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        entries.push_back(parse_double(key, trim(item)));
      }
      if (entries.empty()) {
        throw ConfigError("x0 expects a comma-separated list");
      }
      c.x0 = Eigen::Map<const Vector>(entries.data(), static_cast<Eigen::Index>(entries.size()));
    } else if (key == "on-failure") {
      c.on_failure = parse_failure_policy(value);
    } else if (key == "normalize") {
      c.normalize = parse_bool(key, value);
    } else if (key == "max-iter") {
      c.solver.max_iter = static_cast<int>(parse_integer(key, value));
    } else if (key.rfind("param.", 0) == 0 && key.size() > 6) {
      c.params[key.substr(6)] = parse_double(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  return c;
}

KeyValues to_key_values(const SimConfig& c) {
  KeyValues kv;
  kv["scenario"] = c.scenario;
  kv["alg"] = to_string(c.algorithm);
  kv["alpha"] = format_double(c.alpha);
  kv["horizon"] = std::to_string(c.horizon);
  kv["receding"] = c.receding ? "true" : "false";
  kv["steps"] = std::to_string(c.steps);
  kv["seed"] = std::to_string(c.seed);
  kv["noise"] = to_string(c.noise);
  if (c.noise_std) {
    kv["noise-std"] = format_double(*c.noise_std);
  }
  kv["noise-cap"] = format_double(c.noise_cap);
  if (c.fallback) {
    kv["fallback"] = format_double(c.fallback->max_alpha);
    kv["fallback-growth"] = format_double(c.fallback->growth);
  } else {
    kv["fallback"] = "off";
  }
  if (c.q) {
    kv["q"] = format_double(*c.q);
  }
  if (c.r) {
    kv["r"] = format_double(*c.r);
  }
  if (c.x0) {
    std::string s;
    for (Eigen::Index i = 0; i < c.x0->size(); ++i) {
      s += (i ? "," : "") + format_double((*c.x0)(i));
    }
    kv["x0"] = s;
  }
  kv["on-failure"] = to_string(c.on_failure);
  kv["normalize"] = c.normalize ? "true" : "false";
  kv["max-iter"] = std::to_string(c.solver.max_iter);
  for (const auto& [name, value] : c.params) {
    kv["param." + name] = format_double(value);
  }
  return kv;
}

}  // namespace coco::harness

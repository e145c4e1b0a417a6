// cocolq: simulate, sweep and certify covariance-constrained LQ runs.
//
// Exit codes: 0 success, 1 run error (one `error: kind=... message=...` line on
// stderr), 2 usage or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "coco/bench_suite.hpp"
#include "coco/csv.hpp"
#include "coco/harness.hpp"
#include "coco/stability.hpp"

namespace {

using coco::harness::KeyValues;

constexpr int kExitRun = 1;
constexpr int kExitUsage = 2;

// Flags that map one-to-one onto config-file keys.
const std::vector<std::pair<std::string, std::string>> kConfigFlags = {
    {"scenario", "scenario name: switching, grid9, pendulum, adversary, rank-deficient-pair"},
    {"alg", "coco-lq, coco-lq-predict, naive-lti, h-horizon, offline-optimal"},
    {"alpha", "covariance constraint level in [0, 1)"},
    {"horizon", "prediction / planning horizon H"},
    {"receding", "h-horizon: replan every step (true/false)"},
    {"steps", "number of steps T"},
    {"seed", "noise seed"},
    {"noise", "gaussian, truncated or zero"},
    {"noise-std", "per-component noise standard deviation"},
    {"noise-cap", "truncation cap in standard deviations"},
    {"fallback", "off, on, or the largest alpha the fallback may reach"},
    {"fallback-growth", "fallback step: alpha <- alpha*g + (1-g)"},
    {"q", "state cost Q = q I"},
    {"r", "input cost R = r I"},
    {"x0", "initial state, comma separated"},
    {"on-failure", "terminate or zero-control"},
    {"normalize", "also run the offline optimum on the same noise (true/false)"},
    {"max-iter", "SDP iteration limit"},
};

struct RunFlags {
  std::map<std::string, std::string> values;
  std::vector<std::string> params;  // name=value
  std::string config_file;
};

void add_run_flags(CLI::App* app, RunFlags& flags) {
  for (const auto& [name, help] : kConfigFlags) {
    app->add_option("--" + name, flags.values[name], help);
  }
  app->add_option("--param", flags.params, "scenario parameter name=value (repeatable)");
  app->add_option("--config", flags.config_file, "key=value config file; flags override it")
      ->check(CLI::ExistingFile);
}

coco::harness::SimConfig build_config(const CLI::App* app, const RunFlags& flags) {
  KeyValues kv;
  if (!flags.config_file.empty()) {
    std::ifstream in(flags.config_file);
    kv = coco::harness::read_key_values(in);
  }
  for (const auto& [name, value] : flags.values) {
    if (app->count("--" + name) > 0) {
      kv[name] = value;
    }
  }
  for (const auto& p : flags.params) {
    const auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw coco::ConfigError("--param expects name=value, got '" + p + "'");
    }
    kv["param." + p.substr(0, eq)] = p.substr(eq + 1);
  }
  coco::harness::SimConfig config = coco::harness::apply_key_values({}, kv);
  coco::harness::validate(config);
  return config;
}

// Opens `path` for writing, or returns stdout for "" and "-".
std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") {
    return std::cout;
  }
  file.open(path);
  if (!file) {
    throw coco::InvalidInput("cannot open '" + path + "' for writing");
  }
  return file;
}

void print_report(const coco::harness::CostReport& r) {
  std::cerr << std::setprecision(6) << "avg_cost=" << r.avg_cost;
  if (r.normalized) {
    std::cerr << " normalized=" << *r.normalized;
  }
  std::cerr << " sup_state_norm=" << r.sup_state_norm << " sup_noise_norm=" << r.sup_noise_norm
            << " steps=" << r.steps_completed << " diverged=" << (r.diverged ? "yes" : "no") << '\n';
}

int cmd_simulate(const CLI::App* app, const RunFlags& flags, const std::string& out) {
  const auto config = build_config(app, flags);
  const auto result = coco::harness::simulate(config);
  {
    std::ofstream file;
    auto& os = open_out(out, file);
    coco::csv::write_trajectory(os, result.trajectory);
  }
  if (!out.empty() && out != "-") {
    std::ofstream meta(out + ".meta");
    coco::harness::write_key_values(meta, coco::harness::to_key_values(config));
  }
  print_report(result.report);
  if (result.trajectory.terminated) {
    const auto& last = result.trajectory.rows.back();
    std::cerr << "error: kind=step-failed t=" << last.t << " message=" << result.trajectory.failure << '\n';
    return kExitRun;
  }
  return 0;
}

std::vector<double> parse_alpha_list(const std::string& list) {
  std::vector<double> alphas;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      alphas.push_back(std::stod(item, &used));
      if (used != item.size()) {
        throw std::invalid_argument(item);
      }
    } catch (const std::logic_error&) {
      throw coco::ConfigError("--alphas: not a number: '" + item + "'");
    }
  }
  if (alphas.empty()) {
    throw coco::ConfigError("--alphas: empty list");
  }
  return alphas;
}

int cmd_sweep(const CLI::App* app, const RunFlags& flags, const std::string& alpha_list, int seeds,
              const std::string& out) {
  auto config = build_config(app, flags);
  const auto alphas = parse_alpha_list(alpha_list);
  for (double a : alphas) {
    config.alpha = a;
    coco::harness::validate(config);
  }
  const auto rows = coco::harness::alpha_sweep(config, alphas, seeds);
  std::ofstream file;
  coco::csv::write_sweep(open_out(out, file), rows);
  return 0;
}

int cmd_certify(const CLI::App* app, const RunFlags& flags, const std::string& in_path, const std::string& out,
                const std::string& dump_dir) {
  const auto config = build_config(app, flags);
  std::ifstream in(in_path);
  if (!in) {
    throw coco::InvalidInput("cannot open '" + in_path + "'");
  }
  const auto trajectory = coco::csv::read_trajectory(in);
  std::vector<coco::sdp::Problem> failing;
  const auto cert = coco::harness::certify_trajectory(config, trajectory, dump_dir.empty() ? nullptr : &failing);
  {
    std::ofstream file;
    coco::stability::write_certificate_csv(open_out(out, file), cert);
  }
  if (!dump_dir.empty() && !failing.empty()) {
    std::filesystem::create_directories(dump_dir);
    for (std::size_t i = 0; i < failing.size(); ++i) {
      std::ofstream dump(std::filesystem::path(dump_dir) / ("problem_" + std::to_string(i) + ".txt"));
      coco::sdp::write_problem(dump, failing[i]);
    }
  }
  std::cerr << std::setprecision(4) << (cert.pass ? "PASS" : "FAIL") << " steps=" << cert.steps.size()
            << " failing=" << cert.failing.size() << " margin_L=" << cert.margin_L()
            << " margin_kappa=" << cert.margin_kappa() << " margin_transition=" << cert.margin_transition()
            << '\n';
  return 0;
}

int cmd_bench(const std::vector<int>& ids, int seeds, const std::string& artifacts) {
  coco::bench::SuiteOptions options;
  options.seeds = seeds;
  options.artifact_dir = artifacts;
  if (!artifacts.empty()) {
    std::filesystem::create_directories(artifacts);
  }
  bool all = true;
  for (int id : ids.empty() ? coco::bench::criterion_ids() : ids) {
    const auto result = coco::bench::run_criterion(id, options);
    std::cout << coco::bench::format_line(result) << std::endl;
    all = all && result.pass;
  }
  return all ? 0 : kExitRun;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Covariance-constrained online LQ control"};
  app.require_subcommand(1);

  RunFlags sim_flags;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "run one closed-loop simulation and write a trajectory CSV");
  add_run_flags(sim, sim_flags);
  sim->add_option("--out", sim_out, "trajectory CSV (stdout when omitted); also writes <out>.meta");

  RunFlags sweep_flags;
  std::string sweep_out;
  std::string alphas = "0.3,0.35,0.4,0.45,0.5,0.55,0.6,0.65,0.7,0.75,0.8,0.85,0.9";
  int sweep_seeds = 1;
  auto* sweep = app.add_subcommand("sweep-alpha", "average cost over a list of alpha values");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--alphas", alphas, "comma separated alpha values");
  sweep->add_option("--seeds", sweep_seeds, "seeds per alpha, starting at --seed")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sweep_out, "sweep CSV (stdout when omitted)");

  RunFlags cert_flags;
  std::string cert_in;
  std::string cert_out;
  std::string dump_dir;
  auto* cert = app.add_subcommand("certify", "recompute and certify the per-step gains of a trajectory");
  add_run_flags(cert, cert_flags);
  cert->add_option("--in", cert_in, "trajectory CSV written by simulate")->required();
  cert->add_option("--out", cert_out, "margins CSV (stdout when omitted)");
  cert->add_option("--dump-dir", dump_dir, "write the SDP of every failing step here");

  std::vector<int> criteria;
  int bench_seeds = 5;
  std::string artifacts;
  auto* bench = app.add_subcommand("bench", "run the acceptance scenarios");
  bench->add_option("--criterion", criteria, "criterion id (repeatable; all when omitted)")
      ->check(CLI::Range(1, 10));
  bench->add_option("--seeds", bench_seeds, "seeds per stochastic check")->check(CLI::PositiveNumber);
  bench->add_option("--artifacts", artifacts, "directory for sweep and certificate CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*sim) {
      return cmd_simulate(sim, sim_flags, sim_out);
    }
    if (*sweep) {
      return cmd_sweep(sweep, sweep_flags, alphas, sweep_seeds, sweep_out);
    }
    if (*cert) {
      return cmd_certify(cert, cert_flags, cert_in, cert_out, dump_dir);
    }
    return cmd_bench(criteria, bench_seeds, artifacts);
  } catch (const coco::ConfigError& e) {
    std::cerr << "error: kind=" << e.kind() << " message=" << e.what() << '\n';
    return kExitUsage;
  } catch (const coco::Error& e) {
    std::cerr << "error: kind=" << e.kind() << " message=" << e.what() << '\n';
    return kExitRun;
  } catch (const std::exception& e) {
    std::cerr << "error: kind=internal message=" << e.what() << '\n';
    return kExitRun;
  }
}

// Command-line front end: certification runs, bound experiments, simulation.

#include "rsm/analysis.hpp"
#include "rsm/config.hpp"
#include "rsm/error.hpp"
#include "rsm/expectation.hpp"
#include "rsm/io.hpp"
#include "rsm/verifier.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace rsm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUnknown = 2;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> timeout;
  std::optional<std::string> refinement;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.timeout) cfg.certify.verifier.timeout_seconds = *o.timeout;
  if (o.refinement) cfg.certify.verifier.refinement = parse_refinement(*o.refinement);
  cfg.validate();
  return cfg;
}

std::pair<SystemSpec, Policy> system_for(const RunConfig& cfg) {
  auto [spec, analytic] = cfg.gain.empty()
                              ? make_benchmark(cfg.benchmark)
                              : make_benchmark(cfg.benchmark, Eigen::RowVector2d(cfg.gain[0], cfg.gain[1]));
  if (cfg.zero_noise) spec.noise.scale.setZero();
  if (cfg.policy == "analytic") return {spec, analytic};
  Mlp net = load_weights(cfg.policy);
  if (net.input_dim() != spec.state_dim || net.output_dim() != spec.action_dim) {
    throw ConfigError("policy: network shape does not match benchmark " + spec.name);
  }
  return {spec, Policy(NetworkPolicy{std::move(net)})};
}

std::string tag(const RunConfig& cfg) { return "seed" + std::to_string(cfg.seed); }

fs::path certificate_path(const RunConfig& cfg) {
  if (!cfg.certificate.empty()) return cfg.certificate;
  return fs::path(cfg.output_dir) / ("certificate_" + cfg.benchmark + "_" + tag(cfg) + ".json");
}

std::string log_line(const IterationLog& l) {
  return "iteration=" + std::to_string(l.iteration) + " event=" + l.event + " tau=" + format_double(l.tau) +
         " points=" + std::to_string(l.grid_points) + " violations=" + std::to_string(l.violations) +
         " min_margin=" + format_double(l.min_gap) + " lipschitz_v=" + format_double(l.lipschitz_v) +
         " K=" + format_double(l.K) + " weak_decrease=" + (l.weak_decrease ? "1" : "0");
}

int cmd_verify(const RunConfig& cfg) {
  const auto [spec, pol] = system_for(cfg);
  const fs::path out(cfg.output_dir);
  const fs::path log_path = out / ("verdict_" + cfg.benchmark + "_" + tag(cfg) + ".log");
  fs::create_directories(out);
  std::string log_text;
  // the log is rewritten after every entry so an interrupted run keeps it
  const VerdictReport report = certify(spec, pol, cfg.certify, cfg.seed, [&](const IterationLog& l) {
    const std::string line = log_line(l);
    std::cout << line << std::endl;
    log_text += line + "\n";
    write_file_atomic(log_path, log_text);
  });
  log_text += "outcome=" + to_string(report.outcome) + " iterations=" + std::to_string(report.iterations) + "\n";
  write_file_atomic(log_path, log_text);

  CsvTable summary({"benchmark", "seed", "outcome", "iterations", "mesh", "runtime_s"});
  summary.add_row({cfg.benchmark, std::to_string(cfg.seed), to_string(report.outcome),
                   std::to_string(report.iterations),
                   format_double(report.certificate ? report.certificate->tau : report.final_tau),
                   format_double(report.wall_seconds)});
  write_file_atomic(out / ("summary_" + cfg.benchmark + "_" + tag(cfg) + ".csv"), summary.str());
  std::cout << summary.str();

  if (report.outcome == Outcome::Verified) {
    save_certificate(certificate_path(cfg), *report.certificate);
    std::cout << "certificate: " << certificate_path(cfg).string() << "\n";
    return kExitOk;
  }
  std::cerr << "result: " << to_string(report.outcome) << "\n";
  return kExitUnknown;
}

// Uniform states of X outside X_s, drawn by rejection.
std::vector<Vec> random_states(const SystemSpec& spec, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec> out;
  while (static_cast<int>(out.size()) < n) {
    Vec x(spec.state_dim);
    for (int a = 0; a < spec.state_dim; ++a) x[a] = rng.uniform(spec.state_space.lo()[a], spec.state_space.hi()[a]);
    if (!spec.in_stab_set(x)) out.push_back(x);
  }
  return out;
}

int cmd_bound_experiment(const RunConfig& cfg) {
  const auto [spec, pol] = system_for(cfg);
  Mlp v;
  if (cfg.random_v) {
    Rng rng = Rng(cfg.seed).split(7);
    std::vector<int> sizes{spec.state_dim};
    sizes.insert(sizes.end(), cfg.certify.hidden.begin(), cfg.certify.hidden.end());
    sizes.push_back(1);
    v = Mlp::random(sizes, rng);
  } else {
    const fs::path p = certificate_path(cfg);
    if (!fs::exists(p)) throw InvalidInput("certificate not found: " + p.string());
    v = load_certificate(p).network;
  }
  const Rng root(cfg.seed);
  const auto states = random_states(spec, cfg.bound_states, root.split(1).next_u64());
  CsvTable table({"state_index", "x1", "x2", "k", "bound", "mc_estimate", "mc_std"});
  std::vector<NoisePartition> parts;
  for (int k : cfg.bound_ks) parts.push_back(build_partition(spec.noise, k));
  for (std::size_t i = 0; i < states.size(); ++i) {
    const McEstimate mc =
        mc_estimate(v, spec, pol, states[i], cfg.bound_mc_samples, root.split(100 + i).next_u64());
    for (std::size_t j = 0; j < parts.size(); ++j) {
      const double bound = expected_upper_bound(v, spec, pol, states[i], parts[j]);
      table.add_row({std::to_string(i), format_double(states[i][0]), format_double(states[i][1]),
                     std::to_string(cfg.bound_ks[j]), format_double(bound), format_double(mc.mean),
                     format_double(mc.stddev)});
    }
  }
  const fs::path out = fs::path(cfg.output_dir) / ("bound_experiment_" + cfg.benchmark + "_" + tag(cfg) + ".csv");
  write_file_atomic(out, table.str());
  std::cout << out.string() << " (" << table.rows() << " rows)\n";
  return kExitOk;
}

Vec start_state(const RunConfig& cfg, const SystemSpec& spec) {
  if (!cfg.sim_x0.empty()) return Eigen::Vector2d(cfg.sim_x0[0], cfg.sim_x0[1]);
  return 0.8 * spec.state_space.hi();
}

void write_trajectories(const RunConfig& cfg, const SystemSpec& spec, const Policy& pol) {
  CsvTable table({"run", "t", "x1", "x2"});
  const Rng root(cfg.seed);
  const auto starts = random_states(spec, cfg.sim_trajectories, root.split(2).next_u64());
  for (int r = 0; r < cfg.sim_trajectories; ++r) {
    const auto traj = simulate_trajectory(spec, pol, starts[static_cast<std::size_t>(r)], cfg.sim_steps,
                                          root.split(1000 + static_cast<std::uint64_t>(r)).next_u64());
    for (std::size_t t = 0; t < traj.size(); ++t) {
      table.add_row({std::to_string(r), std::to_string(t), format_double(traj[t][0]), format_double(traj[t][1])});
    }
  }
  const fs::path out = fs::path(cfg.output_dir) / ("trajectories_" + cfg.benchmark + "_" + tag(cfg) + ".csv");
  write_file_atomic(out, table.str());
  std::cout << out.string() << " (" << table.rows() << " rows)\n";
}

int cmd_simulate_trajectories(const RunConfig& cfg) {
  const auto [spec, pol] = system_for(cfg);
  write_trajectories(cfg, spec, pol);
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg) {
  const auto [spec, pol] = system_for(cfg);
  write_trajectories(cfg, spec, pol);
  const fs::path dir(cfg.output_dir);
  const std::string suffix = cfg.benchmark + "_" + tag(cfg) + ".csv";

  std::optional<Certificate> cert;
  if (fs::exists(certificate_path(cfg))) cert = load_certificate(certificate_path(cfg));
  const Vec x0 = start_state(cfg, spec);
  const long long horizon = cert ? simulation_horizon(*cert, x0) : 10'000;
  const TrajectoryStats stats =
      simulate_hitting_times(spec, pol, x0, cfg.sim_runs, horizon, Rng(cfg.seed).split(3).next_u64());

  CsvTable hits({"run", "t_hit"});
  for (std::size_t r = 0; r < stats.hitting_times.size(); ++r) {
    const long long h = stats.hitting_times[r];
    hits.add_row({std::to_string(r), h == kUnfinished ? std::string("inf") : std::to_string(h)});
  }
  write_file_atomic(dir / ("hitting_times_" + suffix), hits.str());
  std::cout << "runs=" << stats.runs << " horizon=" << stats.horizon << " unfinished=" << stats.unfinished()
            << " mean=" << format_double(stats.mean()) << "\n";
  if (!cert) {
    std::cout << "no certificate at " << certificate_path(cfg).string() << ", skipping bound overlays\n";
    return kExitOk;
  }

  const double c_state = bounded_difference_c(spec, pol);
  const double c_v = rsm_difference_c(*cert, c_state);
  CsvTable tail({"t", "empirical", "markov", "azuma"});
  for (long long t : cfg.tail_times) {
    tail.add_row({std::to_string(t), format_double(stats.survival(t)), format_double(markov_tail_bound(*cert, x0, t)),
                  format_double(azuma_tail_bound(*cert, x0, t, c_v))});
  }
  write_file_atomic(dir / ("tail_" + suffix), tail.str());
  std::cout << "expected_time_bound=" << format_double(expected_time_bound(*cert, x0)) << "\n";

  CsvTable contour({"x1", "x2", "bound"});
  for (const ContourPoint& p : contour_export(*cert, spec.state_space, cfg.contour_resolution)) {
    contour.add_row({format_double(p.x1), format_double(p.x2), format_double(p.bound)});
  }
  write_file_atomic(dir / ("contour_" + suffix), contour.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn and verify ranking supermartingale stability certificates"};
  app.require_subcommand(1);
  Overrides o;
  std::uint64_t seed = 0;
  std::string out;
  double timeout = 0.0;
  std::string refinement;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "key = value configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "random seed (overrides the config)");
    cmd->add_option("--out", out, "output directory (overrides the config)");
  };
  CLI::App* verify = app.add_subcommand("verify", "run the learner/verifier loop and write a certificate");
  add_common(verify);
  verify->add_option("--timeout", timeout, "wall-clock limit in seconds");
  verify->add_option("--refinement", refinement, "scheduled, on-demand or both")
      ->check(CLI::IsMember({"scheduled", "on-demand", "both"}));
  CLI::App* bound = app.add_subcommand("bound-experiment", "expectation bound vs Monte-Carlo estimate");
  add_common(bound);
  CLI::App* simulate = app.add_subcommand("simulate", "rollouts, hitting times, tail bounds and contour raster");
  add_common(simulate);
  CLI::App* traj = app.add_subcommand("simulate-trajectories", "rollout trajectories only");
  add_common(traj);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  CLI::App* cmd = app.get_subcommands().front();
  if (cmd->count("--seed")) o.seed = seed;
  if (cmd->count("--out")) o.out = out;
  if (cmd->get_option_no_throw("--timeout") && cmd->count("--timeout")) o.timeout = timeout;
  if (cmd->get_option_no_throw("--refinement") && cmd->count("--refinement")) o.refinement = refinement;

  try {
    const RunConfig cfg = resolve(o);
    if (cmd == verify) return cmd_verify(cfg);
    if (cmd == bound) return cmd_bound_experiment(cfg);
    if (cmd == simulate) return cmd_simulate(cfg);
    return cmd_simulate_trajectories(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

#include "rsm/verifier.hpp"

#include "rsm/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rsm {

double compute_K(double lipschitz_v, double lipschitz_f, double lipschitz_pi) {
  if (lipschitz_v < 0.0 || lipschitz_f < 0.0 || lipschitz_pi < 0.0) {
    throw InvalidInput("compute_K: Lipschitz constants must be nonnegative");
  }
  return lipschitz_v * (lipschitz_f * (lipschitz_pi + 1.0) + 1.0);
}

double global_lower_bound(const Mlp& v, const Box& region) {
  IntervalBounder bounder(v);
  return bounder.bound(region.lo(), region.hi()).lo;
}

std::string to_string(Refinement mode) {
  switch (mode) {
    case Refinement::Scheduled: return "scheduled";
    case Refinement::OnDemand: return "on-demand";
    case Refinement::Both: return "both";
  }
  return "both";
}

Refinement parse_refinement(const std::string& s) {
  if (s == "scheduled") return Refinement::Scheduled;
  if (s == "on-demand") return Refinement::OnDemand;
  if (s == "both") return Refinement::Both;
  throw ConfigError("unknown refinement mode '" + s + "' (expected scheduled, on-demand or both)");
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Verified: return "verified";
    case Outcome::Counterexamples: return "counterexamples";
    case Outcome::Timeout: return "timeout";
  }
  return "timeout";
}

GridCheck check_grid(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Discretization& grid,
                     const NoisePartition& part, double K, double slack,
                     std::optional<Clock::time_point> deadline) {
  GridCheck out;
  out.points = grid.size();
  out.min_gap = std::numeric_limits<double>::infinity();
  out.min_passing_gap = std::numeric_limits<double>::infinity();
  ExpectationBounder bounder(v, spec, part);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (deadline && (i & 1023) == 0 && Clock::now() >= *deadline) {
      out.timed_out = true;
      break;
    }
    const Vec x = grid.point(i);
    const double value = forward_scalar(v, x);
    const double bound = bounder.upper(pol, x);
    const double required = value - grid.point_mesh[i] * K;
    const double gap = required - bound;
    out.min_gap = std::min(out.min_gap, gap);
    if (!(bound < value)) out.weak_decrease = false;
    if (!(bound < required - slack)) {
      out.violations.push_back({i, x, -gap});
    } else {
      out.min_passing_gap = std::min(out.min_passing_gap, gap);
    }
  }
  // worst first; index order breaks ties so the result is deterministic
  std::stable_sort(out.violations.begin(), out.violations.end(),
                   [](const Violation& a, const Violation& b) { return a.margin > b.margin; });
  return out;
}

double compute_epsilon(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Discretization& grid,
                       const NoisePartition& part, double K, double slack) {
  const GridCheck check = check_grid(v, spec, pol, grid, part, K, slack);
  if (!check.passed()) {
    throw ContractError("compute_epsilon: grid has " + std::to_string(check.violations.size()) + " violations");
  }
  return check.min_gap;
}

Discretization refine_scheduled(const SystemSpec& spec, const Discretization& grid, double factor,
                                std::size_t cap) {
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("refinement factor must lie in (0, 1)");
  return build_grid(spec, grid.mesh * factor, cap);
}

Discretization refine_cells(const SystemSpec& spec, const Discretization& grid,
                            const std::vector<Violation>& violations, int splits, std::size_t cap) {
  if (splits < 1) throw ConfigError("on-demand refinement needs at least one split per axis");
  const int d = grid.dim();
  std::size_t per_cell = 1;
  for (int a = 0; a < d; ++a) per_cell *= static_cast<std::size_t>(splits);
  if (violations.size() * per_cell > cap) {
    throw ResourceError("on-demand refinement would create " + std::to_string(violations.size() * per_cell) +
                        " points, cap is " + std::to_string(cap));
  }
  std::vector<Vec> pts, lows, highs;
  std::vector<double> meshes;
  for (const Violation& viol : violations) {
    const Vec lo = grid.cell_lo.col(static_cast<Eigen::Index>(viol.index));
    const Vec hi = grid.cell_hi.col(static_cast<Eigen::Index>(viol.index));
    const Vec width = (hi - lo) / splits;
    std::vector<int> idx(d, 0);
    for (std::size_t s = 0; s < per_cell; ++s) {
      Vec slo(d), shi(d);
      for (int a = 0; a < d; ++a) {
        slo[a] = lo[a] + (hi[a] - lo[a]) * idx[a] / splits;
        shi[a] = idx[a] + 1 == splits ? hi[a] : lo[a] + (hi[a] - lo[a]) * (idx[a] + 1) / splits;
      }
      if (!spec.stab_set.contains(Box(slo, shi))) {
        pts.push_back(0.5 * (slo + shi));
        lows.push_back(slo);
        highs.push_back(shi);
        meshes.push_back(0.5 * (shi - slo).sum() * (1.0 + 4e-9));
      }
      for (int a = d - 1; a >= 0; --a) {
        if (++idx[a] < splits) break;
        idx[a] = 0;
      }
    }
  }
  Discretization out;
  out.mesh = grid.mesh / splits;
  const auto n = static_cast<Eigen::Index>(pts.size());
  out.points.resize(d, n);
  out.cell_lo.resize(d, n);
  out.cell_hi.resize(d, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.points.col(i) = pts[static_cast<std::size_t>(i)];
    out.cell_lo.col(i) = lows[static_cast<std::size_t>(i)];
    out.cell_hi.col(i) = highs[static_cast<std::size_t>(i)];
  }
  out.point_mesh = std::move(meshes);
  return out;
}

namespace {

// Grid without the listed points, followed by the points of `extra`.
Discretization replace_points(const Discretization& grid, const std::vector<Violation>& removed,
                              const Discretization& extra) {
  std::vector<bool> drop(grid.size(), false);
  for (const Violation& v : removed) drop[v.index] = true;
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!drop[i]) keep.push_back(static_cast<Eigen::Index>(i));
  }
  const auto n = static_cast<Eigen::Index>(keep.size()) + extra.points.cols();
  Discretization out;
  out.mesh = grid.mesh;
  out.points.resize(grid.dim(), n);
  out.cell_lo.resize(grid.dim(), n);
  out.cell_hi.resize(grid.dim(), n);
  Eigen::Index c = 0;
  for (Eigen::Index i : keep) {
    out.points.col(c) = grid.points.col(i);
    out.cell_lo.col(c) = grid.cell_lo.col(i);
    out.cell_hi.col(c) = grid.cell_hi.col(i);
    out.point_mesh.push_back(grid.point_mesh[static_cast<std::size_t>(i)]);
    ++c;
  }
  out.points.rightCols(extra.points.cols()) = extra.points;
  out.cell_lo.rightCols(extra.points.cols()) = extra.cell_lo;
  out.cell_hi.rightCols(extra.points.cols()) = extra.cell_hi;
  out.point_mesh.insert(out.point_mesh.end(), extra.point_mesh.begin(), extra.point_mesh.end());
  return out;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

Box reachable_hull(const SystemSpec& spec, const Policy& pol) {
  const Box image = spec.dynamics_box_extension(spec.state_space, pol.act(spec.state_space), spec.noise.support());
  Vec lo = spec.state_space.lo().cwiseMin(image.lo());
  Vec hi = spec.state_space.hi().cwiseMax(image.hi());
  return Box(lo, hi);
}

Certificate make_certificate(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Discretization& grid,
                             const NoisePartition& part, double slack, std::optional<double> epsilon) {
  Certificate cert;
  cert.network = v;
  cert.lipschitz_v = lipschitz_l1(v);
  cert.lipschitz_f = spec.lipschitz_f;
  cert.lipschitz_pi = pol.lipschitz();
  cert.K = compute_K(cert.lipschitz_v, cert.lipschitz_f, cert.lipschitz_pi);
  cert.tau = grid.mesh;
  cert.slack = slack;
  cert.benchmark = spec.name;
  cert.cells_per_dim = part.cells_per_dim;
  cert.grid_points = grid.size();
  cert.epsilon = epsilon ? *epsilon : compute_epsilon(v, spec, pol, grid, part, cert.K, slack);
  // nonnegative on X and on everything reachable from X in one step
  cert.m = std::max(0.0, -global_lower_bound(v, reachable_hull(spec, pol)));
  return cert;
}

void VerifierConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("verifier_tau must be positive");
  if (cells_per_dim < 1) throw ConfigError("cells_per_dim must be at least 1");
  if (!(slack >= 0.0)) throw ConfigError("slack must be nonnegative");
  if (refine_after < 1) throw ConfigError("refine_after must be at least 1");
  if (!(refine_factor > 0.0 && refine_factor < 1.0)) throw ConfigError("refine_factor must lie in (0, 1)");
  if (!(min_tau >= 0.0)) throw ConfigError("min_tau must be nonnegative");
  if (refine_splits < 1) throw ConfigError("refine_splits must be at least 1");
  if (max_counterexamples < 1) throw ConfigError("max_counterexamples must be at least 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (!(timeout_seconds >= 0.0)) throw ConfigError("timeout must be nonnegative");
}

VerdictReport certify(const SystemSpec& spec, const Policy& pol, const CertifyConfig& cfg, std::uint64_t seed,
                      const std::function<void(const IterationLog&)>& on_log) {
  const Clock::time_point start = Clock::now();
  cfg.learner.validate();
  cfg.verifier.validate();
  spec.validate();
  const VerifierConfig& vc = cfg.verifier;
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(vc.timeout_seconds));

  VerdictReport report;
  report.final_tau = vc.tau;
  auto emit = [&](IterationLog entry) {
    entry.seconds = seconds_since(start);
    report.log.push_back(entry);
    if (on_log) on_log(entry);
  };
  auto finish = [&](Outcome o) {
    report.outcome = o;
    report.wall_seconds = seconds_since(start);
    if (report.certificate) {
      report.certificate->seed = seed;
      report.certificate->iterations = report.iterations;
      report.certificate->wall_seconds = report.wall_seconds;
    }
    return report;
  };
  if (vc.timeout_seconds <= 0.0) return finish(Outcome::Timeout);

  const Rng root(seed);
  std::vector<int> sizes{spec.state_dim};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(1);
  Rng init_rng = root.split(0);
  Mlp v = Mlp::random(sizes, init_rng);

  const Discretization learner_grid = build_grid(spec, cfg.learner.grid_tau, vc.grid_cap);
  SampleStore store = init_samples(spec, pol, learner_grid, cfg.learner.samples_per_point, root.split(1).next_u64());
  Discretization grid = build_grid(spec, vc.tau, vc.grid_cap);
  const NoisePartition part = build_partition(spec.noise, vc.cells_per_dim);
  const double lf = spec.lipschitz_f;
  const double lpi = pol.lipschitz();
  const double threshold = lipschitz_threshold(cfg.learner, lf, lpi);
  const double margin_factor = cfg.learner.tau * compute_K(1.0, lf, lpi);
  const bool scheduled = vc.refinement != Refinement::OnDemand;
  const bool on_demand = vc.refinement != Refinement::Scheduled;

  int failed = 0;
  for (int it = 1; it <= vc.max_iterations; ++it) {
    if (Clock::now() >= deadline) return finish(Outcome::Timeout);
    report.iterations = it;
    const Rng iter_rng = root.split(1000 + static_cast<std::uint64_t>(it));

    v = train_candidate(v, store, margin_factor, threshold, cfg.learner, iter_rng.split(0).next_u64());
    if (Clock::now() >= deadline) return finish(Outcome::Timeout);

    const double lv = lipschitz_l1(v);
    const double K = compute_K(lv, lf, lpi);
    GridCheck check = check_grid(v, spec, pol, grid, part, K, vc.slack, deadline);
    if (check.timed_out) return finish(Outcome::Timeout);
    IterationLog entry{it, grid.mesh, grid.size(), check.violations.size(), check.min_gap, lv, K,
                       check.weak_decrease, "check", 0.0};
    emit(entry);

    if (check.passed()) {
      report.certificate = make_certificate(v, spec, pol, grid, part, vc.slack, check.min_gap);
      return finish(Outcome::Verified);
    }

    if (on_demand && check.weak_decrease) {
      const Discretization fine = refine_cells(spec, grid, check.violations, vc.refine_splits, vc.grid_cap);
      GridCheck fine_check = check_grid(v, spec, pol, fine, part, K, vc.slack, deadline);
      if (fine_check.timed_out) return finish(Outcome::Timeout);
      emit({it, fine.mesh, fine.size(), fine_check.violations.size(), fine_check.min_gap, lv, K,
            fine_check.weak_decrease, "on-demand", 0.0});
      if (fine_check.passed()) {
        const Discretization merged = replace_points(grid, check.violations, fine);
        report.certificate = make_certificate(v, spec, pol, merged, part, vc.slack,
                                              std::min(check.min_passing_gap, fine_check.min_gap));
        report.certificate->refined_points = fine.size();
        return finish(Outcome::Verified);
      }
      // the refined violations are the sharper counterexamples
      check.violations = std::move(fine_check.violations);
    }

    ++failed;
    const std::size_t n_cex = std::min(check.violations.size(), vc.max_counterexamples);
    std::vector<Vec> cex;
    cex.reserve(n_cex);
    for (std::size_t i = 0; i < n_cex; ++i) cex.push_back(check.violations[i].x);
    report.counterexamples.assign(check.violations.begin(), check.violations.begin() + static_cast<long>(n_cex));
    add_states(store, spec, pol, cex, cfg.learner.samples_per_point, iter_rng.split(1).next_u64());

    if (scheduled && failed % vc.refine_after == 0 && grid.mesh * vc.refine_factor >= vc.min_tau) {
      grid = refine_scheduled(spec, grid, vc.refine_factor, vc.grid_cap);
      report.final_tau = grid.mesh;
      emit({it, grid.mesh, grid.size(), 0, 0.0, lv, K, false, "refine", 0.0});
    }
  }
  return finish(Outcome::Counterexamples);
}

}  // namespace rsm

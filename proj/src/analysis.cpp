#include "rsm/analysis.hpp"

#include "rsm/error.hpp"

#include <algorithm>
#include <cmath>

namespace rsm {

double expected_time_bound(const Certificate& cert, const Vec& x0) {
  if (!(cert.epsilon > 0.0)) throw InvalidInput("expected_time_bound: certificate epsilon must be positive");
  return std::max(0.0, cert.value(x0)) / cert.epsilon;
}

double markov_tail(double value, double epsilon, long long t) {
  if (t < 1) throw InvalidInput("markov_tail_bound: t must be at least 1");
  if (!(epsilon > 0.0)) throw InvalidInput("markov_tail_bound: epsilon must be positive");
  return std::clamp(value / (epsilon * static_cast<double>(t)), 0.0, 1.0);
}

double azuma_tail(double value, double epsilon, long long t, double c) {
  if (t < 1) throw InvalidInput("azuma_tail_bound: t must be at least 1");
  if (!(c > 0.0)) throw InvalidInput("azuma_tail_bound: c must be positive");
  if (!(epsilon > 0.0)) throw InvalidInput("azuma_tail_bound: epsilon must be positive");
  const double s = (c + epsilon) * (c + epsilon);
  // log-space so huge A does not overflow before the clamp
  const double log_bound = epsilon * value / s - static_cast<double>(t) * epsilon * epsilon / (2.0 * s);
  return std::clamp(std::exp(std::min(log_bound, 0.0)), 0.0, 1.0);
}

double markov_tail_bound(const Certificate& cert, const Vec& x0, long long t) {
  return markov_tail(cert.value(x0), cert.epsilon, t);
}

double azuma_tail_bound(const Certificate& cert, const Vec& x0, long long t, double c) {
  return azuma_tail(cert.value(x0), cert.epsilon, t, c);
}

double bounded_difference_c(const SystemSpec& spec, const Policy& pol, double cell_width) {
  if (!(cell_width > 0.0)) throw InvalidInput("bounded_difference_c: cell width must be positive");
  const int d = spec.state_dim;
  const Box& X = spec.state_space;
  const Box noise = spec.noise.support();
  std::vector<int> n(d);
  for (int a = 0; a < d; ++a) {
    n[a] = std::max(1, static_cast<int>(std::ceil(X.width()[a] / cell_width * (1.0 - 1e-12))));
  }
  double c = 0.0;
  std::vector<int> idx(d, 0);
  while (true) {
    Vec lo(d), hi(d);
    for (int a = 0; a < d; ++a) {
      const double w = X.hi()[a] - X.lo()[a];
      lo[a] = X.lo()[a] + w * idx[a] / n[a];
      hi[a] = idx[a] + 1 == n[a] ? X.hi()[a] : X.lo()[a] + w * (idx[a] + 1) / n[a];
    }
    const Box cell(lo, hi);
    double disp = 0.0;
    if (spec.displacement_extension) {
      const Box delta = spec.displacement_extension(cell, pol.act(cell), noise);
      for (int a = 0; a < d; ++a) disp += std::max(std::abs(delta.lo()[a]), std::abs(delta.hi()[a]));
    } else {
      // sup over x' in the successor box and x in the cell of |x'_a - x_a|
      const Box next = spec.dynamics_box_extension(cell, pol.act(cell), noise);
      for (int a = 0; a < d; ++a) {
        disp += std::max(next.hi()[a] - cell.lo()[a], cell.hi()[a] - next.lo()[a]);
      }
    }
    c = std::max(c, disp);
    int a = d - 1;
    for (; a >= 0; --a) {
      if (++idx[a] < n[a]) break;
      idx[a] = 0;
    }
    if (a < 0) break;
  }
  return c;
}

double rsm_difference_c(const Certificate& cert, double state_c) { return cert.lipschitz_v * state_c; }

TimeBounds time_bounds(const Certificate& cert, const Vec& x0, const std::vector<long long>& ts,
                       std::optional<double> c) {
  TimeBounds out;
  out.expected_bound = expected_time_bound(cert, x0);
  out.c = c;
  for (long long t : ts) {
    out.markov_tail[t] = markov_tail_bound(cert, x0, t);
    if (c) out.azuma_tail[t] = azuma_tail_bound(cert, x0, t, *c);
  }
  return out;
}

std::size_t TrajectoryStats::unfinished() const {
  return static_cast<std::size_t>(std::count(hitting_times.begin(), hitting_times.end(), kUnfinished));
}

double TrajectoryStats::survival(long long t) const {
  if (hitting_times.empty()) return 0.0;
  const auto n = std::count_if(hitting_times.begin(), hitting_times.end(), [t](long long h) { return h >= t; });
  return static_cast<double>(n) / static_cast<double>(hitting_times.size());
}

double TrajectoryStats::mean() const {
  double s = 0.0;
  std::size_t n = 0;
  for (long long h : hitting_times) {
    if (h == kUnfinished) continue;
    s += static_cast<double>(h);
    ++n;
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

double TrajectoryStats::stddev() const {
  const double m = mean();
  double s = 0.0;
  std::size_t n = 0;
  for (long long h : hitting_times) {
    if (h == kUnfinished) continue;
    s += (static_cast<double>(h) - m) * (static_cast<double>(h) - m);
    ++n;
  }
  return n > 1 ? std::sqrt(s / static_cast<double>(n - 1)) : 0.0;
}

TrajectoryStats simulate_hitting_times(const SystemSpec& spec, const Policy& pol, const Vec& x0, int runs,
                                       long long horizon, std::uint64_t seed) {
  if (runs < 1) throw InvalidInput("simulate_hitting_times: runs must be at least 1");
  if (horizon < 1) throw InvalidInput("simulate_hitting_times: horizon must be at least 1");
  TrajectoryStats stats;
  stats.horizon = horizon;
  stats.runs = runs;
  stats.seed = seed;
  const Rng root(seed);
  for (int r = 0; r < runs; ++r) {
    Rng rng = root.split(static_cast<std::uint64_t>(r));
    Vec x = x0;
    long long hit = kUnfinished;
    for (long long t = 0; t <= horizon; ++t) {
      if (spec.in_stab_set(x)) {
        hit = t;
        break;
      }
      if (t == horizon) break;
      x = step(spec, pol, x, sample_noise(spec.noise, rng));
    }
    stats.hitting_times.push_back(hit);
  }
  return stats;
}

long long simulation_horizon(const Certificate& cert, const Vec& x0, double miss, long long cap) {
  if (!(miss > 0.0 && miss <= 1.0)) throw InvalidInput("simulation_horizon: miss probability must lie in (0, 1]");
  const double h = std::ceil(std::max(0.0, cert.value(x0)) / (cert.epsilon * miss));
  if (!(h < static_cast<double>(cap))) return cap;
  return std::max(1LL, static_cast<long long>(h));
}

std::vector<Vec> simulate_trajectory(const SystemSpec& spec, const Policy& pol, const Vec& x0, int steps,
                                     std::uint64_t seed) {
  if (steps < 0) throw InvalidInput("simulate_trajectory: steps must be nonnegative");
  Rng rng(seed);
  std::vector<Vec> out{x0};
  for (int t = 0; t < steps; ++t) out.push_back(step(spec, pol, out.back(), sample_noise(spec.noise, rng)));
  return out;
}

std::vector<ContourPoint> contour_export(const Certificate& cert, const Box& region, int resolution) {
  if (resolution < 2) throw InvalidInput("contour_export: resolution must be at least 2");
  if (region.dim() != 2) throw InvalidInput("contour_export: needs a 2D state space");
  std::vector<ContourPoint> out;
  out.reserve(static_cast<std::size_t>(resolution) * resolution);
  Mat pts(2, resolution * resolution);
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      const double a = region.lo()[0] + (region.hi()[0] - region.lo()[0]) * i / (resolution - 1);
      const double b = region.lo()[1] + (region.hi()[1] - region.lo()[1]) * j / (resolution - 1);
      pts(0, i * resolution + j) = a;
      pts(1, i * resolution + j) = b;
    }
  }
  const Eigen::RowVectorXd v = forward_batch(cert.network, pts).row(0);
  for (Eigen::Index k = 0; k < pts.cols(); ++k) {
    out.push_back({pts(0, k), pts(1, k), std::max(0.0, v[k] + cert.m) / cert.epsilon});
  }
  return out;
}

}  // namespace rsm

#pragma once

#include "rsm/system.hpp"
#include "rsm/verifier.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace rsm {

/// V'(x0) / epsilon.
double expected_time_bound(const Certificate& cert, const Vec& x0);
/// min(1, V'(x0) / (epsilon t)). Throws InvalidInput for t < 1.
double markov_tail_bound(const Certificate& cert, const Vec& x0, long long t);
/// min(1, A exp(-t eps^2 / (2 (c + eps)^2))) with A = exp(eps V'(x0) / (c + eps)^2).
/// Throws InvalidInput for c <= 0 or t < 1.
double azuma_tail_bound(const Certificate& cert, const Vec& x0, long long t, double c);

/// Same formulas on raw numbers (value = V'(x0)).
double markov_tail(double value, double epsilon, long long t);
double azuma_tail(double value, double epsilon, long long t, double c);

/// Sound bound on sup ||f(x, pi(x), w) - x||_1 over X x support, from the
/// box enclosure on a cover of X by cells of width at most `cell_width`.
double bounded_difference_c(const SystemSpec& spec, const Policy& pol, double cell_width = 0.05);

/// Bounded-difference constant of V' along trajectories: L_V times the
/// state displacement bound.
double rsm_difference_c(const Certificate& cert, double state_c);

struct TimeBounds {
  double expected_bound = 0.0;
  std::map<long long, double> markov_tail;
  std::map<long long, double> azuma_tail;  // empty without c
  std::optional<double> c;
};

TimeBounds time_bounds(const Certificate& cert, const Vec& x0, const std::vector<long long>& ts,
                       std::optional<double> c = std::nullopt);

inline constexpr long long kUnfinished = std::numeric_limits<long long>::max();

struct TrajectoryStats {
  std::vector<long long> hitting_times;  // kUnfinished past the horizon
  long long horizon = 0;
  int runs = 0;
  std::uint64_t seed = 0;

  std::size_t unfinished() const;
  /// Empirical P[T >= t]; unfinished runs count as >= t.
  double survival(long long t) const;
  /// Mean and sample standard deviation over finished runs.
  double mean() const;
  double stddev() const;
};

/// Independent rollouts from x0; run r uses stream r of `seed`. Records the
/// first t with x_t in the stabilization set.
TrajectoryStats simulate_hitting_times(const SystemSpec& spec, const Policy& pol, const Vec& x0, int runs,
                                       long long horizon, std::uint64_t seed);

/// Rollout horizon at which the Markov bound reaches `miss`:
/// ceil(V'(x0) / (epsilon miss)), capped.
long long simulation_horizon(const Certificate& cert, const Vec& x0, double miss = 1e-3,
                             long long cap = 1'000'000);

/// States x_0 .. x_steps of one rollout.
std::vector<Vec> simulate_trajectory(const SystemSpec& spec, const Policy& pol, const Vec& x0, int steps,
                                     std::uint64_t seed);

struct ContourPoint {
  double x1 = 0.0;
  double x2 = 0.0;
  double bound = 0.0;  // V'(x) / epsilon
};

/// Raster of expected_time_bound over the state space, `resolution` points
/// per axis, first axis varying slowest. Requires a 2D state space.
std::vector<ContourPoint> contour_export(const Certificate& cert, const Box& region, int resolution);

}  // namespace rsm

#pragma once

#include "rsm/box.hpp"
#include "rsm/mlp.hpp"
#include "rsm/system.hpp"

#include <cstdint>
#include <vector>

namespace rsm {

struct NoiseCell {
  Box box;
  double mass = 0.0;  // probability of the cell under the noise law
};

/// Grid of k^p equal-width cells over the noise support.
struct NoisePartition {
  std::vector<NoiseCell> cells;
  int cells_per_dim = 0;

  double total_mass() const;
};

/// Cell masses are products of exact CDF differences. Throws ConfigError for k < 1.
NoisePartition build_partition(const TriangularNoise& noise, int k);

/// Upper bound on E_w[V(f(x, pi(x), w))]:
///   sum_i mass(N_i) * sup_{w in N_i} V(f(x, pi(x), w)),
/// each supremum bounded by pushing the cell through the dynamics enclosure
/// and then through V with interval bound propagation.
double expected_upper_bound(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Vec& x,
                            const NoisePartition& part);

/// Same bound, reusing a prepared evaluator. Used by the verifier's inner loop.
double expected_upper_bound(IntervalBounder& bounder, const SystemSpec& spec, const Policy& pol,
                            const Vec& x, const NoisePartition& part);

/// Prepared form of expected_upper_bound for one network and partition.
/// When the system declares a noise_map the successor boxes are the shifted
/// images of the noise cells, so all cells of a state are bounded in one
/// batched pass. Otherwise it falls back to the per-cell enclosure.
class ExpectationBounder {
 public:
  ExpectationBounder(const Mlp& v, const SystemSpec& spec, const NoisePartition& part);
  double upper(const Policy& pol, const Vec& x);

 private:
  const SystemSpec* spec_;
  const NoisePartition* part_;
  IntervalBounder bounder_;
  bool additive_ = false;
  Mat offset_center_;  // noise_map * cell centre, one column per cell
  Mat offset_radius_;  // |noise_map| * cell radius
  Eigen::VectorXd masses_;
  Mat center_;
  Mat radius_;
};

struct McEstimate {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation of V(x')
  int n = 0;

  double standard_error() const;
};

/// Monte-Carlo estimate from n sampled successors. Reproducible per seed.
McEstimate mc_estimate(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Vec& x, int n,
                       std::uint64_t seed);
double mc_expectation(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Vec& x, int n,
                      std::uint64_t seed);

}  // namespace rsm

#include "rsm/expectation.hpp"

#include "rsm/error.hpp"

#include <cmath>

namespace rsm {

double NoisePartition::total_mass() const {
  double m = 0.0;
  for (const NoiseCell& c : cells) m += c.mass;
  return m;
}

NoisePartition build_partition(const TriangularNoise& noise, int k) {
  if (k < 1) throw ConfigError("noise partition needs at least one cell per dimension");
  const int p = noise.dim();
  if (p < 1) throw ConfigError("noise partition: noise has no coordinates");

  // per-dimension breakpoints and masses
  std::vector<std::vector<double>> edges(p), masses(p);
  for (int d = 0; d < p; ++d) {
    const double s = noise.scale[d];
    for (int i = 0; i <= k; ++i) edges[d].push_back(i == k ? s : -s + 2.0 * s * i / k);
    for (int i = 0; i < k; ++i) {
      if (s <= 0.0) {
        masses[d].push_back(1.0 / k);
      } else {
        masses[d].push_back(noise_cdf(noise, d, edges[d][i + 1]) - noise_cdf(noise, d, edges[d][i]));
      }
    }
  }

  NoisePartition part;
  part.cells_per_dim = k;
  std::size_t total = 1;
  for (int d = 0; d < p; ++d) total *= static_cast<std::size_t>(k);
  part.cells.reserve(total);
  std::vector<int> idx(p, 0);
  for (std::size_t c = 0; c < total; ++c) {
    Vec lo(p), hi(p);
    double mass = 1.0;
    for (int d = 0; d < p; ++d) {
      lo[d] = edges[d][idx[d]];
      hi[d] = edges[d][idx[d] + 1];
      mass *= masses[d][idx[d]];
    }
    part.cells.push_back({Box(lo, hi), mass});
    for (int d = p - 1; d >= 0; --d) {
      if (++idx[d] < k) break;
      idx[d] = 0;
    }
  }
  return part;
}

double expected_upper_bound(IntervalBounder& bounder, const SystemSpec& spec, const Policy& pol,
                            const Vec& x, const NoisePartition& part) {
  const Vec u = pol.act(x);
  double total = 0.0;
  for (const NoiseCell& cell : part.cells) {
    if (cell.mass <= 0.0) continue;
    const Box succ = spec.dynamics_interval_extension(x, u, cell.box);
    total += cell.mass * bounder.upper(succ.lo(), succ.hi());
  }
  return total;
}

double expected_upper_bound(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Vec& x,
                            const NoisePartition& part) {
  IntervalBounder bounder(v);
  return expected_upper_bound(bounder, spec, pol, x, part);
}

ExpectationBounder::ExpectationBounder(const Mlp& v, const SystemSpec& spec, const NoisePartition& part)
    : spec_(&spec), part_(&part), bounder_(v) {
  additive_ = spec.noise_map.rows() == spec.state_dim && spec.noise_map.cols() == spec.noise_dim;
  if (!additive_) return;
  const auto n = static_cast<Eigen::Index>(part.cells.size());
  const Mat abs_map = spec.noise_map.cwiseAbs();
  offset_center_.resize(spec.state_dim, n);
  offset_radius_.resize(spec.state_dim, n);
  masses_.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const NoiseCell& cell = part.cells[static_cast<std::size_t>(c)];
    offset_center_.col(c) = spec.noise_map * cell.box.center();
    offset_radius_.col(c) = abs_map * (0.5 * cell.box.width());
    masses_[c] = cell.mass;
  }
}

double ExpectationBounder::upper(const Policy& pol, const Vec& x) {
  if (!additive_) return expected_upper_bound(bounder_, *spec_, pol, x, *part_);
  const Vec u = pol.act(x);
  const Vec base = spec_->dynamics(x, u, Vec::Zero(spec_->noise_dim));
  center_ = offset_center_.colwise() + base;
  // same outward padding as the benchmark enclosures, plus the rounding of
  // the centre/radius split
  radius_ = offset_radius_.array() + 1e-12 * (1.0 + center_.array().abs() + offset_radius_.array());
  const Eigen::RowVectorXd ub = bounder_.upper_batch(center_, radius_);
  return ub.dot(masses_.transpose());
}

double McEstimate::standard_error() const { return n > 0 ? stddev / std::sqrt(static_cast<double>(n)) : 0.0; }

McEstimate mc_estimate(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Vec& x, int n,
                       std::uint64_t seed) {
  if (n < 1) throw InvalidInput("mc_estimate: n must be at least 1");
  Rng rng(seed);
  const Vec u = pol.act(x);
  Mat succ(spec.state_dim, n);
  for (int i = 0; i < n; ++i) succ.col(i) = spec.dynamics(x, u, sample_noise(spec.noise, rng));
  const Eigen::RowVectorXd values = forward_batch(v, succ).row(0);
  McEstimate est;
  est.n = n;
  est.mean = values.mean();
  if (n > 1) {
    est.stddev = std::sqrt((values.array() - est.mean).square().sum() / (n - 1));
  }
  return est;
}

double mc_expectation(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Vec& x, int n,
                      std::uint64_t seed) {
  return mc_estimate(v, spec, pol, x, n, seed).mean;
}

}  // namespace rsm

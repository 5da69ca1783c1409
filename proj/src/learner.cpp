#include "rsm/learner.hpp"

#include "rsm/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rsm {

namespace {

// Cells whose boundary lies within this fraction of a spacing of the
// stabilization set boundary are treated as touching it.
constexpr double kSnap = 1e-9;
// Inflation of the cover radius absorbing kSnap and spacing round-off.
constexpr double kMeshInflation = 1.0 + 4e-9;
// Floor on L_V when normalising the decrease term; below it V is treated as constant.
constexpr double kMinLipschitz = 1e-12;

struct AxisGrid {
  int intervals = 0;
  double lo = 0.0;
  double spacing = 0.0;
  std::vector<double> coords;
  std::vector<bool> keep_alone;  // vertex has an incident cell outside X_s on this axis
};

AxisGrid make_axis(double lo, double hi, double s_lo, double s_hi, double max_spacing) {
  AxisGrid ax;
  const double width = hi - lo;
  ax.intervals = std::max(1, static_cast<int>(std::ceil(width / max_spacing * (1.0 - 1e-12))));
  ax.lo = lo;
  ax.spacing = width / ax.intervals;
  for (int i = 0; i <= ax.intervals; ++i) {
    ax.coords.push_back(i == ax.intervals ? hi : lo + width * i / ax.intervals);
  }
  const double tol = kSnap * ax.spacing;
  std::vector<bool> inside(ax.intervals);
  for (int j = 0; j < ax.intervals; ++j) {
    inside[j] = ax.coords[j] >= s_lo - tol && ax.coords[j + 1] <= s_hi + tol;
  }
  for (int i = 0; i <= ax.intervals; ++i) {
    bool all_inside = true;
    if (i > 0) all_inside = all_inside && inside[i - 1];
    if (i < ax.intervals) all_inside = all_inside && inside[i];
    ax.keep_alone.push_back(!all_inside);
  }
  return ax;
}

std::vector<AxisGrid> make_axes(const SystemSpec& spec, double tau) {
  if (!(tau > 0.0)) throw InvalidInput("build_grid: mesh must be positive");
  const int d = spec.state_dim;
  const double max_spacing = 2.0 * tau / d;
  std::vector<AxisGrid> axes;
  for (int a = 0; a < d; ++a) {
    axes.push_back(make_axis(spec.state_space.lo()[a], spec.state_space.hi()[a], spec.stab_set.lo()[a],
                             spec.stab_set.hi()[a], max_spacing));
  }
  return axes;
}

}  // namespace

Box Discretization::cell(std::size_t i) const {
  const auto c = static_cast<Eigen::Index>(i);
  return Box(cell_lo.col(c), cell_hi.col(c));
}

std::size_t grid_point_count(const SystemSpec& spec, double tau) {
  const auto axes = make_axes(spec, tau);
  double total = 1.0;
  double dropped = 1.0;
  for (const AxisGrid& ax : axes) {
    total *= ax.intervals + 1;
    dropped *= static_cast<double>(std::count(ax.keep_alone.begin(), ax.keep_alone.end(), false));
  }
  return static_cast<std::size_t>(total - dropped);
}

Discretization build_grid(const SystemSpec& spec, double tau, std::size_t cap) {
  const auto axes = make_axes(spec, tau);
  const int d = spec.state_dim;
  const std::size_t count = grid_point_count(spec, tau);
  if (count > cap) {
    throw ResourceError("grid with mesh " + std::to_string(tau) + " has " + std::to_string(count) +
                        " points, cap is " + std::to_string(cap));
  }
  Discretization grid;
  grid.mesh = tau;
  grid.points.resize(d, static_cast<Eigen::Index>(count));
  grid.cell_lo.resize(d, static_cast<Eigen::Index>(count));
  grid.cell_hi.resize(d, static_cast<Eigen::Index>(count));
  grid.point_mesh.assign(count, tau * kMeshInflation);

  std::vector<int> idx(d, 0);
  Eigen::Index n = 0;
  while (true) {
    bool keep = false;
    for (int a = 0; a < d; ++a) keep = keep || axes[a].keep_alone[idx[a]];
    if (keep) {
      for (int a = 0; a < d; ++a) {
        const AxisGrid& ax = axes[a];
        const double v = ax.coords[idx[a]];
        grid.points(a, n) = v;
        grid.cell_lo(a, n) = std::max(ax.coords.front(), v - 0.5 * ax.spacing);
        grid.cell_hi(a, n) = std::min(ax.coords.back(), v + 0.5 * ax.spacing);
      }
      ++n;
    }
    int a = d - 1;
    for (; a >= 0; --a) {
      if (++idx[a] <= axes[a].intervals) break;
      idx[a] = 0;
    }
    if (a < 0) break;
  }
  return grid;
}

std::size_t SampleStore::total_samples() const {
  std::size_t n = 0;
  for (const Mat& s : successors_) n += static_cast<std::size_t>(s.cols());
  return n;
}

std::size_t SampleStore::min_samples() const {
  std::size_t n = successors_.empty() ? 0 : static_cast<std::size_t>(-1);
  for (const Mat& s : successors_) n = std::min(n, static_cast<std::size_t>(s.cols()));
  return n;
}

std::optional<std::size_t> SampleStore::find(const Vec& x) const {
  const auto it = index_.find(std::vector<double>(x.data(), x.data() + x.size()));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t SampleStore::insert(const Vec& x) {
  if (x.size() != state_dim_) throw InvalidInput("SampleStore: state dimension mismatch");
  std::vector<double> key(x.data(), x.data() + x.size());
  const auto [it, fresh] = index_.emplace(std::move(key), points_.size());
  if (fresh) {
    points_.push_back(x);
    successors_.emplace_back(state_dim_, 0);
  }
  return it->second;
}

void SampleStore::append(std::size_t i, const Mat& samples) {
  Mat& s = successors_.at(i);
  Mat merged(state_dim_, s.cols() + samples.cols());
  merged << s, samples;
  s = std::move(merged);
}

Mat sample_successors(const SystemSpec& spec, const Policy& pol, const Vec& x, int n, Rng& rng) {
  const Vec u = pol.act(x);
  Mat out(spec.state_dim, n);
  for (int j = 0; j < n; ++j) out.col(j) = spec.dynamics(x, u, sample_noise(spec.noise, rng));
  return out;
}

SampleStore init_samples(const SystemSpec& spec, const Policy& pol, const Discretization& grid, int n,
                         std::uint64_t seed) {
  if (n < 1) throw InvalidInput("init_samples: N must be at least 1");
  SampleStore store(spec.state_dim);
  const Rng root(seed);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.point(i);
    const std::size_t k = store.insert(x);
    Rng rng = root.split(i);
    store.append(k, sample_successors(spec, pol, x, n, rng));
  }
  return store;
}

void add_counterexamples(SampleStore& store, const SystemSpec& spec, const Policy& pol,
                         const std::vector<Vec>& cex, int n, std::uint64_t seed) {
  std::vector<std::size_t> idx;
  for (const Vec& x : cex) {
    const auto i = store.find(x);
    if (!i) throw InvalidInput("add_counterexamples: state is not a grid point of the sample store");
    idx.push_back(*i);
  }
  const Rng root(seed);
  for (std::size_t c = 0; c < cex.size(); ++c) {
    Rng rng = root.split(c);
    store.append(idx[c], sample_successors(spec, pol, cex[c], n, rng));
  }
}

void add_states(SampleStore& store, const SystemSpec& spec, const Policy& pol, const std::vector<Vec>& states,
                int n, std::uint64_t seed) {
  for (const Vec& x : states) store.insert(x);
  add_counterexamples(store, spec, pol, states, n, seed);
}

void LearnerConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be nonnegative");
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (samples_per_point < 1) throw ConfigError("samples_per_point must be at least 1");
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (!(tau > 0.0)) throw ConfigError("learner_tau must be positive");
  if (!(grid_tau > 0.0)) throw ConfigError("learner_grid_tau must be positive");
  if (batch_size < 0) throw ConfigError("batch_size must be nonnegative");
}

double lipschitz_threshold(const LearnerConfig& cfg, double lipschitz_f, double lipschitz_pi) {
  return cfg.delta / (cfg.tau * (lipschitz_f * (lipschitz_pi + 1.0) + 1.0));
}

std::pair<LossTerms, MlpGradient> loss_gradient(const Mlp& v, const SampleStore& store, double margin_factor,
                                                double threshold, const LearnerConfig& cfg,
                                                const std::vector<std::size_t>& subset) {
  std::vector<std::size_t> all;
  const std::vector<std::size_t>* pts = &subset;
  if (subset.empty()) {
    all.resize(store.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    pts = &all;
  }
  const std::size_t n = pts->size();
  if (n == 0) throw InvalidInput("loss: sample store is empty");

  // column layout: for each point, the point itself then its successors
  Eigen::Index cols = 0;
  for (std::size_t i : *pts) cols += 1 + store.successors(i).cols();
  Mat inputs(store.state_dim(), cols);
  Eigen::Index c = 0;
  for (std::size_t i : *pts) {
    inputs.col(c++) = store.point(i);
    const Mat& s = store.successors(i);
    inputs.middleCols(c, s.cols()) = s;
    c += s.cols();
  }
  const Eigen::RowVectorXd values = forward_batch(v, inputs).row(0);

  // the hinge sum is divided by L_V so that the loss does not reward rescaling V
  const double lv = lipschitz_l1(v);
  const double scale = std::max(lv, kMinLipschitz);
  const double margin = margin_factor * lv;
  Mat d_out = Mat::Zero(1, cols);
  double hinge_sum = 0.0;
  std::size_t active = 0;
  c = 0;
  for (std::size_t i : *pts) {
    const Eigen::Index m = store.successors(i).cols();
    if (m == 0) throw InvalidInput("loss: point without successor samples");
    const double mean_next = values.segment(c + 1, m).mean();
    const double hinge = mean_next - values[c] + margin;
    if (hinge > 0.0) {
      hinge_sum += hinge;
      ++active;
      d_out(0, c) = -1.0 / (static_cast<double>(n) * scale);
      d_out.middleCols(c + 1, m).setConstant(1.0 / (static_cast<double>(n) * m * scale));
    }
    c += 1 + m;
  }
  LossTerms terms;
  const double mean_hinge = hinge_sum / static_cast<double>(n);
  terms.rsm = mean_hinge / scale;

  MlpGradient grad = backward(v, inputs, d_out);
  const double excess = lv - threshold;
  // quotient rule through L_V, plus the Lipschitz term
  double lv_weight = 0.0;
  if (lv > kMinLipschitz) {
    lv_weight = margin_factor * static_cast<double>(active) / (static_cast<double>(n) * lv) - mean_hinge / (lv * lv);
  }
  if (excess > 0.0) {
    terms.lipschitz = excess;
    lv_weight += cfg.lambda;
  }
  if (lv_weight != 0.0) {
    MlpGradient lg = lipschitz_l1_gradient(v);
    lg *= lv_weight;
    grad += lg;
  }
  terms.total = terms.rsm + cfg.lambda * terms.lipschitz;
  return {terms, std::move(grad)};
}

LossTerms loss(const Mlp& v, const SampleStore& store, double margin_factor, double threshold,
               const LearnerConfig& cfg) {
  const std::size_t n = store.size();
  if (n == 0) throw InvalidInput("loss: sample store is empty");
  const double lv = lipschitz_l1(v);
  const double margin = margin_factor * lv;
  LossTerms terms;
  for (std::size_t i = 0; i < n; ++i) {
    const Mat& s = store.successors(i);
    if (s.cols() == 0) throw InvalidInput("loss: point without successor samples");
    const double mean_next = forward_batch(v, s).row(0).mean();
    terms.rsm += std::max(mean_next - forward_scalar(v, store.point(i)) + margin, 0.0);
  }
  terms.rsm /= static_cast<double>(n) * std::max(lv, kMinLipschitz);
  terms.lipschitz = std::max(lv - threshold, 0.0);
  terms.total = terms.rsm + cfg.lambda * terms.lipschitz;
  return terms;
}

Mlp train_candidate(const Mlp& v, const SampleStore& store, double margin_factor, double threshold,
                    const LearnerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Mlp net = v;
  if (cfg.epochs == 0) return net;
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  MlpGradient m1 = MlpGradient::zeros_like(net);
  MlpGradient m2 = MlpGradient::zeros_like(net);

  const std::size_t n = store.size();
  const bool full = cfg.batch_size == 0 || static_cast<std::size_t>(cfg.batch_size) >= n;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::size_t cursor = n;
  std::vector<std::size_t> batch;

  double b1t = 1.0;
  double b2t = 1.0;
  for (int t = 1; t <= cfg.epochs; ++t) {
    if (!full) {
      batch.clear();
      while (batch.size() < static_cast<std::size_t>(cfg.batch_size)) {
        if (cursor == n) {
          // Fisher-Yates reshuffle per pass
          for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
          cursor = 0;
        }
        batch.push_back(order[cursor++]);
      }
    }
    auto [terms, grad] = loss_gradient(net, store, margin_factor, threshold, cfg, full ? std::vector<std::size_t>{} : batch);
    if (!std::isfinite(terms.total)) {
      throw TrainingDiverged("training diverged at step " + std::to_string(t));
    }
    b1t *= beta1;
    b2t *= beta2;
    auto& layers = net.mutable_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto update = [&](auto& param, auto& g, auto& mom1, auto& mom2) {
        mom1 = beta1 * mom1 + (1.0 - beta1) * g;
        mom2 = beta2 * mom2 + (1.0 - beta2) * g.cwiseProduct(g);
        const auto mhat = mom1 / (1.0 - b1t);
        const auto vhat = mom2 / (1.0 - b2t);
        param.array() -= cfg.learning_rate * mhat.array() / (vhat.array().sqrt() + eps);
      };
      update(layers[l].weight, grad.layers[l].weight, m1.layers[l].weight, m2.layers[l].weight);
      update(layers[l].bias, grad.layers[l].bias, m1.layers[l].bias, m2.layers[l].bias);
    }
  }
  return net;
}

}  // namespace rsm

#pragma once

#include "rsm/box.hpp"
#include "rsm/mlp.hpp"
#include "rsm/system.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace rsm {

/// Finite set of states covering X \ X_s: every state of X \ X_s lies within
/// l1 distance point_mesh[i] of some point i whose cell contains it.
struct Discretization {
  Mat points;                      // state_dim x n
  Mat cell_lo;                     // region covered by each point
  Mat cell_hi;
  std::vector<double> point_mesh;  // l1 cover radius of each point's cell
  double mesh = 0.0;               // nominal mesh tau of the grid

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  int dim() const { return static_cast<int>(points.rows()); }
  Vec point(std::size_t i) const { return points.col(static_cast<Eigen::Index>(i)); }
  Box cell(std::size_t i) const;
};

inline constexpr std::size_t kDefaultGridCap = 100'000'000;

/// Uniform grid over the state-space box with per-axis spacing at most
/// 2 tau / state_dim. Vertices whose incident cells all lie inside the
/// stabilization set are dropped. Throws ResourceError above `cap` points.
Discretization build_grid(const SystemSpec& spec, double tau, std::size_t cap = kDefaultGridCap);

/// Analytic number of points build_grid produces (cross-check for tests and
/// resource estimates).
std::size_t grid_point_count(const SystemSpec& spec, double tau);

/// Successor samples D_x for every training point.
class SampleStore {
 public:
  SampleStore() = default;
  explicit SampleStore(int state_dim) : state_dim_(state_dim) {}

  std::size_t size() const { return successors_.size(); }
  int state_dim() const { return state_dim_; }
  Vec point(std::size_t i) const { return points_[i]; }
  const Mat& successors(std::size_t i) const { return successors_[i]; }
  std::size_t total_samples() const;
  std::size_t min_samples() const;

  std::optional<std::size_t> find(const Vec& x) const;
  /// Appends a point with no samples yet; returns its index. Existing points
  /// are returned unchanged.
  std::size_t insert(const Vec& x);
  void append(std::size_t i, const Mat& samples);

 private:
  int state_dim_ = 0;
  std::vector<Vec> points_;
  std::vector<Mat> successors_;
  std::map<std::vector<double>, std::size_t> index_;
};

/// N i.i.d. successors f(x, pi(x), w) of one state, drawn from `rng`.
Mat sample_successors(const SystemSpec& spec, const Policy& pol, const Vec& x, int n, Rng& rng);

/// D_x for every grid point; point i draws from stream i of `seed`.
SampleStore init_samples(const SystemSpec& spec, const Policy& pol, const Discretization& grid, int n,
                         std::uint64_t seed);

/// Adds N successors to each counterexample. Every state must already be a
/// point of the store (InvalidInput otherwise).
void add_counterexamples(SampleStore& store, const SystemSpec& spec, const Policy& pol,
                         const std::vector<Vec>& cex, int n, std::uint64_t seed);

/// Registers states that are not yet in the store (with N successors each)
/// and adds N successors to those that are.
void add_states(SampleStore& store, const SystemSpec& spec, const Policy& pol, const std::vector<Vec>& states,
                int n, std::uint64_t seed);

struct LearnerConfig {
  double lambda = 0.0005;         // weight of the Lipschitz term
  double delta = 4.0;             // Lipschitz threshold numerator
  double learning_rate = 1e-4;
  int samples_per_point = 20;     // N
  int epochs = 2000;              // optimiser steps per learner round
  double tau = 0.1;               // mesh in the loss margin tau K
  double grid_tau = 0.1;          // mesh of the learner's own training grid
  int batch_size = 0;             // points per step, 0 = full batch

  /// Throws ConfigError on non-positive fields.
  void validate() const;
};

/// delta / (tau (L_f (L_pi + 1) + 1)).
double lipschitz_threshold(const LearnerConfig& cfg, double lipschitz_f, double lipschitz_pi);

struct LossTerms {
  double rsm = 0.0;
  double lipschitz = 0.0;
  double total = 0.0;
};

/// L = L_RSM + lambda L_Lipschitz with
///   L_RSM = mean_x max{mean_{x' in D_x} V(x') - V(x) + margin_factor L_V, 0} / L_V
///   L_Lipschitz = max{L_V - threshold, 0}.
/// margin_factor L_V is the tau K term, with margin_factor = tau (L_f (L_pi + 1) + 1).
LossTerms loss(const Mlp& v, const SampleStore& store, double margin_factor, double threshold,
               const LearnerConfig& cfg);

/// Loss and its parameter gradient over a subset of store points (all points
/// when `subset` is empty).
std::pair<LossTerms, MlpGradient> loss_gradient(const Mlp& v, const SampleStore& store, double margin_factor,
                                                double threshold, const LearnerConfig& cfg,
                                                const std::vector<std::size_t>& subset = {});

/// cfg.epochs Adam steps (beta1 0.9, beta2 0.999) on the loss. Deterministic
/// per seed. Throws TrainingDiverged if the loss turns non-finite.
Mlp train_candidate(const Mlp& v, const SampleStore& store, double margin_factor, double threshold,
                    const LearnerConfig& cfg, std::uint64_t seed);

}  // namespace rsm

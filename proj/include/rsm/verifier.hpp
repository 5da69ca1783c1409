#pragma once

#include "rsm/expectation.hpp"
#include "rsm/learner.hpp"
#include "rsm/mlp.hpp"
#include "rsm/system.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rsm {

/// K = L_V (L_f (L_pi + 1) + 1).
double compute_K(double lipschitz_v, double lipschitz_f, double lipschitz_pi);

/// IBP lower bound of V over a box.
double global_lower_bound(const Mlp& v, const Box& region);

enum class Refinement { Scheduled, OnDemand, Both };

std::string to_string(Refinement mode);
/// Accepts "scheduled", "on-demand", "both". Throws ConfigError otherwise.
Refinement parse_refinement(const std::string& s);

struct Violation {
  std::size_t index = 0;  // grid point index
  Vec x;
  double margin = 0.0;    // bound - (V(x) - tau_x K), positive when violated
};

/// Result of checking the decrease condition on a grid.
struct GridCheck {
  std::vector<Violation> violations;  // worst first
  bool weak_decrease = true;          // bound < V(x) at every point
  double min_gap = 0.0;               // min over points of V(x) - tau_x K - bound
  double min_passing_gap = 0.0;       // same min over the non-violating points only
  std::size_t points = 0;
  bool timed_out = false;

  bool passed() const { return !timed_out && violations.empty(); }
};

using Clock = std::chrono::steady_clock;

/// Checks bound(x) < V(x) - tau_x K - slack at every grid point, where tau_x
/// is the point's cover radius. Stops early (timed_out) past `deadline`.
GridCheck check_grid(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Discretization& grid,
                     const NoisePartition& part, double K, double slack = 1e-9,
                     std::optional<Clock::time_point> deadline = std::nullopt);

/// min over grid points of V(x) - tau_x K - bound(x). Throws ContractError
/// if the grid does not pass the check.
double compute_epsilon(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Discretization& grid,
                       const NoisePartition& part, double K, double slack = 1e-9);

/// Scheduled refinement: a fresh grid at factor * tau.
Discretization refine_scheduled(const SystemSpec& spec, const Discretization& grid, double factor = 0.2,
                                std::size_t cap = kDefaultGridCap);

/// On-demand refinement: the cells of the listed points split into
/// `splits` parts per axis, one point per sub-cell centre. Sub-cells lying
/// inside the stabilization set are skipped.
Discretization refine_cells(const SystemSpec& spec, const Discretization& grid,
                            const std::vector<Violation>& violations, int splits = 10,
                            std::size_t cap = kDefaultGridCap);

/// Verified RSM V' = V + m with its constants.
struct Certificate {
  Mlp network;
  double m = 0.0;
  double epsilon = 0.0;
  double K = 0.0;
  double tau = 0.0;
  double lipschitz_v = 0.0;
  double lipschitz_f = 0.0;
  double lipschitz_pi = 0.0;
  double slack = 1e-9;
  std::string benchmark;
  std::uint64_t seed = 0;
  int cells_per_dim = 0;
  std::size_t grid_points = 0;
  std::size_t refined_points = 0;
  int iterations = 0;
  double wall_seconds = 0.0;

  /// V'(x) = V(x) + m.
  double value(const Vec& x) const { return forward_scalar(network, x) + m; }
};

struct VerifierConfig {
  double tau = 0.01;
  int cells_per_dim = 16;
  double slack = 1e-9;
  Refinement refinement = Refinement::Both;
  int refine_after = 4;          // failed iterations before scheduled refinement
  double refine_factor = 0.2;
  double min_tau = 0.0;          // scheduled refinement never goes below this
  int refine_splits = 10;        // on-demand sub-cells per axis
  std::size_t max_counterexamples = 10000;
  std::size_t grid_cap = kDefaultGridCap;
  int max_iterations = 100;
  double timeout_seconds = 3600.0;

  void validate() const;
};

struct CertifyConfig {
  LearnerConfig learner;
  VerifierConfig verifier;
  std::vector<int> hidden{128};
};

struct IterationLog {
  int iteration = 0;
  double tau = 0.0;
  std::size_t grid_points = 0;
  std::size_t violations = 0;
  double min_gap = 0.0;
  double lipschitz_v = 0.0;
  double K = 0.0;
  bool weak_decrease = false;
  std::string event;  // "check", "on-demand", "refine", ...
  double seconds = 0.0;
};

enum class Outcome { Verified, Counterexamples, Timeout };

std::string to_string(Outcome o);

struct VerdictReport {
  Outcome outcome = Outcome::Timeout;
  std::optional<Certificate> certificate;
  std::vector<Violation> counterexamples;
  std::vector<IterationLog> log;
  int iterations = 0;
  double final_tau = 0.0;
  double wall_seconds = 0.0;
};

/// Learner/verifier loop: train, check, feed counterexamples back, refine.
/// Returns Verified with a certificate, Timeout past the wall-clock limit,
/// or Counterexamples when max_iterations runs out. `on_log` sees every
/// log entry as it is produced.
VerdictReport certify(const SystemSpec& spec, const Policy& pol, const CertifyConfig& cfg, std::uint64_t seed,
                      const std::function<void(const IterationLog&)>& on_log = {});

/// Builds a certificate for a network that passes the check on `grid`.
/// Throws ContractError otherwise. A caller that has already checked the
/// grid passes the resulting epsilon to skip the recheck.
Certificate make_certificate(const Mlp& v, const SystemSpec& spec, const Policy& pol, const Discretization& grid,
                             const NoisePartition& part, double slack = 1e-9,
                             std::optional<double> epsilon = std::nullopt);

/// Box containing X and every one-step successor of it.
Box reachable_hull(const SystemSpec& spec, const Policy& pol);

}  // namespace rsm

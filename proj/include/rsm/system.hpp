#pragma once

#include "rsm/box.hpp"
#include "rsm/mlp.hpp"
#include "rsm/rng.hpp"

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <variant>

namespace rsm {

/// Product of independent triangular laws, coordinate i scaled by scale[i].
/// The unit law has density 1 - |z| on [-1, 1].
struct TriangularNoise {
  Vec scale;

  int dim() const { return static_cast<int>(scale.size()); }
  /// Support box [-scale, scale].
  Box support() const;
};

/// One draw; coordinate i is scale[i] * z with z unit triangular.
Vec sample_noise(const TriangularNoise& noise, Rng& rng);
/// CDF of coordinate `coord` at x. Degenerate (zero-scale) coordinates give a
/// step at 0.
double noise_cdf(const TriangularNoise& noise, int coord, double x);
/// CDF of the unit triangular law.
double unit_triangular_cdf(double z);

/// Action saturation g(u) = max(min(u, 1), -1).
double clip_action(double u);
Vec clip_action(const Vec& u);

/// Closed-loop system under analysis. Immutable after construction.
struct SystemSpec {
  using Dynamics = std::function<Vec(const Vec& x, const Vec& u, const Vec& w)>;
  /// Enclosure of f(x, u, w) for a fixed state and action and all w in a box.
  using PointExtension = std::function<Box(const Vec& x, const Vec& u, const Box& w)>;
  /// Enclosure of f over boxes of states, actions and noise.
  using BoxExtension = std::function<Box(const Box& x, const Box& u, const Box& w)>;

  std::string name;
  int state_dim = 0;
  int action_dim = 0;
  int noise_dim = 0;
  Dynamics dynamics;
  PointExtension dynamics_interval_extension;
  BoxExtension dynamics_box_extension;
  /// Optional enclosure of the displacement f(x, u, w) - x. Tighter than
  /// subtracting boxes since it keeps the dependence on x.
  BoxExtension displacement_extension;
  /// Linear map from w to the state, when the noise enters additively.
  Mat noise_map;
  /// Lipschitz constant of f w.r.t. the l1 norm on the joint (x, u, w) input.
  double lipschitz_f = 0.0;
  Box state_space;
  Box stab_set;
  TriangularNoise noise;
  /// Named physical constants of the model (informational).
  std::map<std::string, double> parameters;

  /// Throws ConfigError if dimensions disagree or stab_set is not a box with
  /// interior inside state_space.
  void validate() const;
  /// True when x lies in the stabilization set.
  bool in_stab_set(const Vec& x) const { return stab_set.contains(x); }
};

/// Saturated linear feedback u = g(gain * x).
struct AnalyticPolicy {
  Mat gain;  // action_dim x state_dim
};

/// Network feedback u = g(net(x)).
struct NetworkPolicy {
  Mlp net;
};

class Policy {
 public:
  explicit Policy(AnalyticPolicy p);
  explicit Policy(NetworkPolicy p);

  Vec act(const Vec& x) const;
  /// Enclosure of the action over a box of states.
  Box act(const Box& x) const;
  int action_dim() const;
  int state_dim() const;
  /// Declared l1 -> l1 Lipschitz constant: ||gain||_1 for analytic
  /// policies, the layer-norm product for networks.
  double lipschitz() const { return lipschitz_; }

  bool is_analytic() const { return std::holds_alternative<AnalyticPolicy>(impl_); }
  const std::variant<AnalyticPolicy, NetworkPolicy>& impl() const { return impl_; }

 private:
  std::variant<AnalyticPolicy, NetworkPolicy> impl_;
  double lipschitz_ = 0.0;
};

/// x' = f(x, pi(x), w). Throws InvalidInput on dimension mismatch.
Vec step(const SystemSpec& spec, const Policy& pol, const Vec& x, const Vec& w);

/// Known benchmark names: "2d-system", "inverted-pendulum".
/// Throws ConfigError for anything else.
std::pair<SystemSpec, Policy> make_benchmark(const std::string& name);

/// Same as make_benchmark, with a custom feedback gain (1 x 2).
std::pair<SystemSpec, Policy> make_benchmark(const std::string& name, const Mat& gain);

/// Default analytic feedback gain used for a benchmark.
Mat default_gain(const std::string& name);

/// Physical constants of the pendulum benchmark.
struct PendulumParams {
  double dt = 0.05;
  double gravity = 10.0;
  double mass = 0.15;
  double length = 0.5;
  double damping = 0.1;
};

}  // namespace rsm

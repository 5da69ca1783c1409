#include "rsm/system.hpp"

#include "rsm/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace rsm {

namespace {

constexpr double kPad = 1e-12;

// Outward padding absorbing the rounding of the closed-form enclosures.
Box padded(const Box& b) {
  const Vec pad = (kPad * (Vec::Ones(b.dim()) + b.lo().cwiseAbs().cwiseMax(b.hi().cwiseAbs()))).eval();
  return Box(b.lo() - pad, b.hi() + pad);
}

void check_dims(const SystemSpec& spec, const Vec& x, const Vec& u, const Vec& w) {
  if (x.size() != spec.state_dim || u.size() != spec.action_dim || w.size() != spec.noise_dim) {
    throw InvalidInput("dynamics: dimension mismatch (state " + std::to_string(x.size()) + ", action " +
                       std::to_string(u.size()) + ", noise " + std::to_string(w.size()) + ")");
  }
}

Interval interval_sin(Interval x) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double lo = std::min(std::sin(x.lo), std::sin(x.hi));
  double hi = std::max(std::sin(x.lo), std::sin(x.hi));
  // extrema inside the interval
  const double k_max = std::ceil((x.lo - std::numbers::pi / 2) / two_pi);
  if (std::numbers::pi / 2 + k_max * two_pi <= x.hi) hi = 1.0;
  const double k_min = std::ceil((x.lo + std::numbers::pi / 2) / two_pi);
  if (-std::numbers::pi / 2 + k_min * two_pi <= x.hi) lo = -1.0;
  return {lo, hi};
}

Box clip_box(const Box& u) {
  return Box(clip_action(u.lo()), clip_action(u.hi()));
}

SystemSpec two_d_system() {
  SystemSpec s;
  s.name = "2d-system";
  s.state_dim = 2;
  s.action_dim = 1;
  s.noise_dim = 2;
  Mat a(2, 2);
  a << 1.0, 0.045, 0.0, 0.9;
  Mat b(2, 1);
  b << 0.45, 0.5;
  Mat noise_map(2, 2);
  noise_map << 0.015, 0.0, 0.0, 0.005;
  s.noise_map = noise_map;
  s.dynamics = [a, b, noise_map](const Vec& x, const Vec& u, const Vec& w) -> Vec {
    return a * x + b * clip_action(u) + noise_map * w;
  };
  s.dynamics_interval_extension = [a, b, noise_map](const Vec& x, const Vec& u, const Box& w) {
    const Vec det = a * x + b * clip_action(u);
    return padded(affine_image(noise_map, w, det));
  };
  s.dynamics_box_extension = [a, b, noise_map](const Box& x, const Box& u, const Box& w) {
    const Vec zero = Vec::Zero(2);
    return padded(affine_image(a, x, zero) + affine_image(b, clip_box(u), zero) +
                  affine_image(noise_map, w, zero));
  };
  s.displacement_extension = [a, b, noise_map](const Box& x, const Box& u, const Box& w) {
    const Vec zero = Vec::Zero(2);
    const Mat drift = a - Mat::Identity(2, 2);
    return padded(affine_image(drift, x, zero) + affine_image(b, clip_box(u), zero) +
                  affine_image(noise_map, w, zero));
  };
  // l1 operator norm of [A | B | S]
  Mat joint(2, 5);
  joint << a, b, noise_map;
  s.lipschitz_f = l1_operator_norm(joint);
  s.state_space = Box(Vec::Constant(2, -0.5), Vec::Constant(2, 0.5));
  s.stab_set = Box(Vec::Constant(2, -0.2), Vec::Constant(2, 0.2));
  s.noise = TriangularNoise{Vec::Ones(2)};
  return s;
}

SystemSpec pendulum_system(const PendulumParams& p) {
  SystemSpec s;
  s.name = "inverted-pendulum";
  s.state_dim = 2;
  s.action_dim = 1;
  s.noise_dim = 2;
  // -1.5 G sin(x1 + pi) / (2 l) is rewritten as +1.5 G sin(x1) / (2 l)
  const double c_sin = 1.5 * p.gravity / (2.0 * p.length);
  const double c_act = 3.0 / (p.mass * p.length * p.length) * 2.0;
  const double dt = p.dt;
  const double keep = 1.0 - p.damping;
  const double w_vel = 0.002;
  const double w_ang = 0.005;

  Mat noise_map(2, 2);
  noise_map << dt * w_vel, w_ang, w_vel, 0.0;
  s.noise_map = noise_map;

  auto deterministic = [=](const Vec& x, const Vec& u) -> Vec {
    const double vel = keep * x[1] + dt * (c_sin * std::sin(x[0]) + c_act * clip_action(u[0]));
    Vec out(2);
    out << x[0] + dt * vel, vel;
    return out;
  };
  s.dynamics = [=](const Vec& x, const Vec& u, const Vec& w) -> Vec {
    const double vel = keep * x[1] + dt * (c_sin * std::sin(x[0]) + c_act * clip_action(u[0])) + w_vel * w[0];
    Vec out(2);
    out << x[0] + dt * vel + w_ang * w[1], vel;
    return out;
  };
  s.dynamics_interval_extension = [=](const Vec& x, const Vec& u, const Box& w) {
    return padded(affine_image(noise_map, w, deterministic(x, u)));
  };
  s.dynamics_box_extension = [=](const Box& x, const Box& u, const Box& w) {
    const Interval sn = interval_sin(x[0]);
    const Box g = clip_box(u);
    const Interval nv{std::min(w_vel * w[0].lo, w_vel * w[0].hi), std::max(w_vel * w[0].lo, w_vel * w[0].hi)};
    const Interval na{std::min(w_ang * w[1].lo, w_ang * w[1].hi), std::max(w_ang * w[1].lo, w_ang * w[1].hi)};
    // velocity: every term is monotone in its own variable
    const Interval vel{keep * x[1].lo + dt * (c_sin * sn.lo + c_act * g.lo()[0]) + nv.lo,
                       keep * x[1].hi + dt * (c_sin * sn.hi + c_act * g.hi()[0]) + nv.hi};
    // angle: x1 + dt^2 c_sin sin(x1) is increasing since dt^2 c_sin < 1
    auto angle_part = [&](double a) { return a + dt * dt * c_sin * std::sin(a); };
    const double rest_lo = dt * (keep * x[1].lo + dt * c_act * g.lo()[0] + nv.lo) + na.lo;
    const double rest_hi = dt * (keep * x[1].hi + dt * c_act * g.hi()[0] + nv.hi) + na.hi;
    Vec lo(2), hi(2);
    lo << angle_part(x[0].lo) + rest_lo, vel.lo;
    hi << angle_part(x[0].hi) + rest_hi, vel.hi;
    return padded(Box(lo, hi));
  };
  s.displacement_extension = [=](const Box& x, const Box& u, const Box& w) {
    const Interval sn = interval_sin(x[0]);
    const Box g = clip_box(u);
    const Interval nv{std::min(w_vel * w[0].lo, w_vel * w[0].hi), std::max(w_vel * w[0].lo, w_vel * w[0].hi)};
    const Interval na{std::min(w_ang * w[1].lo, w_ang * w[1].hi), std::max(w_ang * w[1].lo, w_ang * w[1].hi)};
    const Interval vel{keep * x[1].lo + dt * (c_sin * sn.lo + c_act * g.lo()[0]) + nv.lo,
                       keep * x[1].hi + dt * (c_sin * sn.hi + c_act * g.hi()[0]) + nv.hi};
    // x2' - x2 = -b x2 + dt (...) + noise; x1' - x1 = dt x2' + noise
    const double b = 1.0 - keep;
    const Interval dvel{-b * x[1].hi + dt * (c_sin * sn.lo + c_act * g.lo()[0]) + nv.lo,
                        -b * x[1].lo + dt * (c_sin * sn.hi + c_act * g.hi()[0]) + nv.hi};
    Vec lo(2), hi(2);
    lo << dt * vel.lo + na.lo, dvel.lo;
    hi << dt * vel.hi + na.hi, dvel.hi;
    return padded(Box(lo, hi));
  };
  // column sums of the Jacobian bound (|cos| <= 1) in (x1, x2, u, w1, w2)
  const double col_x1 = dt * c_sin + (1.0 + dt * dt * c_sin);
  const double col_x2 = keep + dt * keep;
  const double col_u = dt * c_act + dt * dt * c_act;
  const double col_w1 = w_vel + dt * w_vel;
  const double col_w2 = w_ang;
  s.lipschitz_f = std::max({col_x1, col_x2, col_u, col_w1, col_w2});
  s.state_space = Box(Vec::Constant(2, -0.5), Vec::Constant(2, 0.5));
  s.stab_set = Box(Vec::Constant(2, -0.2), Vec::Constant(2, 0.2));
  s.noise = TriangularNoise{Vec::Ones(2)};
  s.parameters = {{"dt", p.dt}, {"gravity", p.gravity}, {"mass", p.mass}, {"length", p.length},
                  {"damping", p.damping}};
  return s;
}

}  // namespace

Box TriangularNoise::support() const { return Box(-scale, scale); }

Vec sample_noise(const TriangularNoise& noise, Rng& rng) {
  Vec w(noise.dim());
  for (int i = 0; i < noise.dim(); ++i) w[i] = noise.scale[i] * rng.triangular();
  return w;
}

double unit_triangular_cdf(double z) {
  if (z <= -1.0) return 0.0;
  if (z >= 1.0) return 1.0;
  if (z <= 0.0) return 0.5 * (1.0 + z) * (1.0 + z);
  return 1.0 - 0.5 * (1.0 - z) * (1.0 - z);
}

double noise_cdf(const TriangularNoise& noise, int coord, double x) {
  if (coord < 0 || coord >= noise.dim()) throw InvalidInput("noise_cdf: coordinate out of range");
  const double s = noise.scale[coord];
  if (s <= 0.0) return x < 0.0 ? 0.0 : 1.0;
  return unit_triangular_cdf(x / s);
}

double clip_action(double u) { return std::max(std::min(u, 1.0), -1.0); }

Vec clip_action(const Vec& u) {
  Vec out(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) out[i] = clip_action(u[i]);
  return out;
}

void SystemSpec::validate() const {
  if (state_dim < 1 || action_dim < 1 || noise_dim < 1) throw ConfigError("system: dimensions must be positive");
  if (!dynamics || !dynamics_interval_extension) throw ConfigError("system: dynamics not set");
  if (state_space.dim() != state_dim || stab_set.dim() != state_dim) {
    throw ConfigError("system: region dimension does not match state_dim");
  }
  if (noise.dim() != noise_dim) throw ConfigError("system: noise dimension mismatch");
  if ((noise.scale.array() < 0.0).any()) throw ConfigError("system: negative noise scale");
  if (!stab_set.has_interior()) throw ConfigError("system: stabilization set has empty interior");
  if (!state_space.contains(stab_set)) throw ConfigError("system: stabilization set not inside state space");
  if (!(lipschitz_f >= 0.0)) throw ConfigError("system: Lipschitz constant must be nonnegative");
}

Policy::Policy(AnalyticPolicy p) {
  lipschitz_ = l1_operator_norm(p.gain);
  impl_ = std::move(p);
}

Policy::Policy(NetworkPolicy p) {
  if (p.net.empty()) throw InvalidInput("NetworkPolicy: empty network");
  lipschitz_ = lipschitz_l1(p.net);
  impl_ = std::move(p);
}

Vec Policy::act(const Vec& x) const {
  if (x.size() != state_dim()) throw InvalidInput("policy: state dimension mismatch");
  if (const auto* a = std::get_if<AnalyticPolicy>(&impl_)) return clip_action(Vec(a->gain * x));
  return clip_action(forward(std::get<NetworkPolicy>(impl_).net, x));
}

Box Policy::act(const Box& x) const {
  Box raw;
  if (const auto* a = std::get_if<AnalyticPolicy>(&impl_)) {
    raw = affine_image(a->gain, x, Vec::Zero(a->gain.rows()));
  } else {
    raw = ibp_forward(std::get<NetworkPolicy>(impl_).net, x);
  }
  return clip_box(raw);
}

int Policy::action_dim() const {
  if (const auto* a = std::get_if<AnalyticPolicy>(&impl_)) return static_cast<int>(a->gain.rows());
  return std::get<NetworkPolicy>(impl_).net.output_dim();
}

int Policy::state_dim() const {
  if (const auto* a = std::get_if<AnalyticPolicy>(&impl_)) return static_cast<int>(a->gain.cols());
  return std::get<NetworkPolicy>(impl_).net.input_dim();
}

Vec step(const SystemSpec& spec, const Policy& pol, const Vec& x, const Vec& w) {
  if (pol.action_dim() != spec.action_dim) throw InvalidInput("step: policy action dimension mismatch");
  const Vec u = pol.act(x);
  check_dims(spec, x, u, w);
  return spec.dynamics(x, u, w);
}

Mat default_gain(const std::string& name) {
  Mat k(1, 2);
  if (name == "2d-system") {
    k << -1.0, -1.0;
  } else if (name == "inverted-pendulum") {
    k << -0.3, -0.1;
  } else {
    throw ConfigError("unknown benchmark '" + name + "'");
  }
  return k;
}

std::pair<SystemSpec, Policy> make_benchmark(const std::string& name, const Mat& gain) {
  SystemSpec spec;
  if (name == "2d-system") {
    spec = two_d_system();
  } else if (name == "inverted-pendulum") {
    spec = pendulum_system(PendulumParams{});
  } else {
    throw ConfigError("unknown benchmark '" + name + "'");
  }
  if (gain.rows() != spec.action_dim || gain.cols() != spec.state_dim) {
    throw ConfigError("benchmark gain must be " + std::to_string(spec.action_dim) + "x" +
                      std::to_string(spec.state_dim));
  }
  spec.validate();
  return {std::move(spec), Policy(AnalyticPolicy{gain})};
}

std::pair<SystemSpec, Policy> make_benchmark(const std::string& name) {
  return make_benchmark(name, default_gain(name));
}

}  // namespace rsm

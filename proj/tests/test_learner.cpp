#include "rsm/error.hpp"
#include "rsm/learner.hpp"

#include <doctest.h>

#include <cmath>

using namespace rsm;

namespace {

// 1D system x' = a x + s w on [0, 1] with an empty-interior corner as X_s
// replaced by a tiny set at 0.
SystemSpec line_system(double a, double s) {
  SystemSpec spec;
  spec.name = "line";
  spec.state_dim = 1;
  spec.action_dim = 1;
  spec.noise_dim = 1;
  spec.dynamics = [a, s](const Vec& x, const Vec&, const Vec& w) -> Vec { return a * x + s * w; };
  spec.dynamics_interval_extension = [a, s](const Vec& x, const Vec&, const Box& w) {
    return affine_image(Mat::Constant(1, 1, s), w, a * x);
  };
  spec.noise_map = Mat::Constant(1, 1, s);
  spec.lipschitz_f = std::max(std::abs(a), std::abs(s));
  spec.state_space = Box(Vec::Zero(1), Vec::Ones(1));
  spec.stab_set = Box(Vec::Zero(1), Vec::Constant(1, 1e-3));
  spec.noise = TriangularNoise{Vec::Ones(1)};
  return spec;
}

Policy zero_policy(int d) { return Policy(AnalyticPolicy{Mat::Zero(1, d)}); }

// brute-force count of kept vertices: spacing from the same rule, membership
// decided from the vertex's incident cells
std::size_t enumerate_count(double lo, double hi, double s_lo, double s_hi, double tau, int d) {
  const int n = static_cast<int>(std::ceil((hi - lo) / (2 * tau / d) - 1e-9));
  const double h = (hi - lo) / n;
  std::vector<double> g(n + 1);
  for (int i = 0; i <= n; ++i) g[i] = lo + h * i;
  auto cell_inside = [&](int j) { return j >= 0 && j < n && g[j] >= s_lo - 1e-12 && g[j + 1] <= s_hi + 1e-12; };
  std::size_t kept = 0;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      // dropped iff every cell touching the vertex lies inside X_s
      bool all_inside = true;
      for (int di : {-1, 0}) {
        for (int dj : {-1, 0}) {
          const int ci = i + di, cj = j + dj;
          if (ci < 0 || ci >= n || cj < 0 || cj >= n) continue;
          all_inside = all_inside && cell_inside(ci) && cell_inside(cj);
        }
      }
      if (!all_inside) ++kept;
    }
  }
  return kept;
}

}  // namespace

TEST_CASE("1D grid example") {
  SystemSpec spec = line_system(0.5, 0.0);
  spec.stab_set = Box(Vec::Constant(1, 0.4), Vec::Constant(1, 0.45));
  const Discretization g = build_grid(spec, 0.25);
  REQUIRE(g.size() == 3);
  CHECK(g.points(0, 0) == 0.0);
  CHECK(g.points(0, 1) == 0.5);
  CHECK(g.points(0, 2) == 1.0);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.point_mesh[i] <= 0.25 * (1 + 1e-8));
}

TEST_CASE("2D grid count matches the closed form and an enumeration") {
  auto [spec, pol] = make_benchmark("2d-system");
  const Discretization g = build_grid(spec, 0.01);
  // spacing 0.01 gives 101 vertices per axis; the 39 x 39 interior vertices
  // of the hole [-0.2, 0.2]^2 are dropped
  CHECK(g.size() == 101u * 101u - 39u * 39u);
  CHECK(grid_point_count(spec, 0.01) == g.size());
  CHECK(enumerate_count(-0.5, 0.5, -0.2, 0.2, 0.01, 2) == g.size());
  CHECK(grid_point_count(spec, 0.1) == 112u);
  CHECK(enumerate_count(-0.5, 0.5, -0.2, 0.2, 0.03, 2) == grid_point_count(spec, 0.03));
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Vec x = g.point(i);
    const bool interior = (x.array().abs() < 0.2 - 1e-12).all();
    CHECK_FALSE(interior);
  }
  CHECK_THROWS_AS(build_grid(spec, 0.01, 1000), ResourceError);
  CHECK_THROWS_AS(build_grid(spec, 0.0), InvalidInput);
}

TEST_CASE("grid covers X minus X_s within the mesh") {
  auto [spec, pol] = make_benchmark("2d-system");
  const double tau = 0.03;
  const Discretization g = build_grid(spec, tau);
  Rng rng(1);
  for (int s = 0; s < 2000; ++s) {
    const Vec x = Eigen::Vector2d(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    if (spec.in_stab_set(x)) continue;
    double best = 1e9;
    for (std::size_t i = 0; i < g.size(); ++i) best = std::min(best, (g.point(i) - x).lpNorm<1>());
    CHECK(best < tau);
    // and the point owning x's cell is within its own cover radius
    bool owned = false;
    for (std::size_t i = 0; i < g.size() && !owned; ++i) {
      if (g.cell(i).contains(x)) owned = (g.point(i) - x).lpNorm<1>() <= g.point_mesh[i];
    }
    CHECK(owned);
  }
}

TEST_CASE("init_samples") {
  auto [spec, pol] = make_benchmark("2d-system");
  const Discretization g = build_grid(spec, 0.1);
  const SampleStore store = init_samples(spec, pol, g, 20, 1);
  CHECK(store.size() == g.size());
  CHECK(store.min_samples() == 20u);
  CHECK(store.total_samples() == 20u * g.size());

  SystemSpec quiet = spec;
  quiet.noise.scale.setZero();
  const SampleStore q = init_samples(quiet, pol, g, 5, 1);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Mat& s = q.successors(i);
    for (int c = 1; c < s.cols(); ++c) CHECK(s.col(c) == s.col(0));
  }

  // successors of the origin under u = 0 stay inside the scaled noise box
  Discretization origin;
  origin.points = Mat::Zero(2, 1);
  origin.cell_lo = origin.cell_hi = origin.points;
  origin.point_mesh = {0.0};
  const SampleStore o = init_samples(spec, zero_policy(2), origin, 200, 2);
  for (int c = 0; c < 200; ++c) {
    CHECK(std::abs(o.successors(0)(0, c)) <= 0.015);
    CHECK(std::abs(o.successors(0)(1, c)) <= 0.005);
  }
  CHECK_THROWS_AS(init_samples(spec, pol, g, 0, 1), InvalidInput);
}

TEST_CASE("add_counterexamples") {
  auto [spec, pol] = make_benchmark("2d-system");
  const Discretization g = build_grid(spec, 0.1);
  SampleStore store = init_samples(spec, pol, g, 20, 1);
  const Vec x = g.point(3);
  add_counterexamples(store, spec, pol, {x}, 20, 5);
  CHECK(store.successors(3).cols() == 40);
  CHECK(store.successors(4).cols() == 20);
  const std::size_t before = store.total_samples();
  add_counterexamples(store, spec, pol, {}, 20, 6);
  CHECK(store.total_samples() == before);
  for (int it = 2; it <= 4; ++it) add_counterexamples(store, spec, pol, {x}, 20, 10 + it);
  CHECK(store.successors(3).cols() == 20 * (1 + 4));
  CHECK_THROWS_AS(add_counterexamples(store, spec, pol, {Eigen::Vector2d(0.123, 0.456)}, 20, 7), InvalidInput);

  add_states(store, spec, pol, {Eigen::Vector2d(0.123, 0.456)}, 20, 8);
  CHECK(store.size() == g.size() + 1);
  CHECK(store.successors(g.size()).cols() == 20);
}

TEST_CASE("loss examples") {
  LearnerConfig cfg;
  cfg.lambda = 1.0;
  // V = 0: hinge at margin 0 is exactly zero
  auto [spec, pol] = make_benchmark("2d-system");
  const SampleStore store = init_samples(spec, pol, build_grid(spec, 0.1), 5, 1);
  const Mlp zero = Mlp::constant(2, 0.0);
  CHECK(loss(zero, store, 0.0, 1e9, cfg).rsm == 0.0);

  // one point with V(x) = 7 and successors with mean V = 5
  SampleStore one(1);
  const std::size_t i = one.insert(Vec::Constant(1, 7.0));
  Mat succ(1, 2);
  succ << 4.0, 6.0;
  one.append(i, succ);
  const Mlp ident({Layer{Mat::Ones(1, 1), Vec::Zero(1)}});
  CHECK(loss(ident, one, 1.0, 1e9, cfg).rsm == doctest::Approx(0.0));
  CHECK(loss(ident, one, 3.0, 1e9, cfg).rsm == doctest::Approx(1.0));

  // Lipschitz term max{L_V - threshold, 0}
  const Mlp ten({Layer{Mat::Constant(1, 1, 10.0), Vec::Zero(1)}});
  CHECK(loss(ten, one, 0.0, 8.0, cfg).lipschitz == doctest::Approx(2.0));
  CHECK(loss(ten, one, 0.0, 12.0, cfg).lipschitz == 0.0);
  const LossTerms t = loss(ten, one, 0.0, 8.0, cfg);
  CHECK(t.total == doctest::Approx(t.rsm + cfg.lambda * t.lipschitz));
}

TEST_CASE("lipschitz threshold") {
  LearnerConfig cfg;
  CHECK(lipschitz_threshold(cfg, 1.0, 1.0) == doctest::Approx(4.0 / (0.1 * 3.0)));
}

TEST_CASE("loss gradient matches finite differences") {
  auto [spec, pol] = make_benchmark("2d-system");
  const SampleStore store = init_samples(spec, pol, build_grid(spec, 0.25), 4, 3);
  LearnerConfig cfg;
  cfg.lambda = 0.3;
  Rng rng(4);
  int bad = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<int> sizes{2, 8, 1};
    Mlp v = Mlp::random(sizes, rng);
    for (Layer& l : v.mutable_layers()) {
      for (Eigen::Index j = 0; j < l.bias.size(); ++j) l.bias[j] = rng.uniform(-0.2, 0.2);
    }
    const double margin = rng.uniform(0.0, 0.05);
    const double threshold = rng.uniform(0.5, 2.0);
    const auto [terms, grad] = loss_gradient(v, store, margin, threshold, cfg);
    CHECK(terms.total == doctest::Approx(loss(v, store, margin, threshold, cfg).total).epsilon(1e-12));
    const double h = 1e-6;
    for (std::size_t l = 0; l < v.layers().size(); ++l) {
      for (Eigen::Index k = 0; k < v.layers()[l].weight.size(); k += 3) {
        Mlp p = v, m = v;
        p.mutable_layers()[l].weight.data()[k] += h;
        m.mutable_layers()[l].weight.data()[k] -= h;
        const double fd =
            (loss(p, store, margin, threshold, cfg).total - loss(m, store, margin, threshold, cfg).total) / (2 * h);
        const double an = grad.layers[l].weight.data()[k];
        ++total;
        if (std::abs(fd - an) > 1e-3 * std::max(std::abs(fd), 1e-3)) ++bad;
      }
    }
  }
  // a hinge or ReLU kink inside [-h, h] is the only admissible disagreement
  CHECK(bad <= total / 100);
  CHECK(total > 500);
}

TEST_CASE("training") {
  // 1D linear contraction x' = 0.5 x with small noise
  const SystemSpec spec = line_system(0.5, 0.01);
  const Policy pol = zero_policy(1);
  const Discretization g = build_grid(spec, 0.05);
  const SampleStore store = init_samples(spec, pol, g, 10, 1);
  LearnerConfig cfg;
  cfg.learning_rate = 1e-3;
  Rng rng(2);
  const std::vector<int> sizes{1, 16, 1};
  const Mlp v0 = Mlp::random(sizes, rng);
  const double margin = 0.05;
  const double threshold = 10.0;

  cfg.epochs = 0;
  CHECK(train_candidate(v0, store, margin, threshold, cfg, 1) == v0);

  double prev = loss(v0, store, margin, threshold, cfg).total;
  const double initial = prev;
  Mlp v = v0;
  cfg.epochs = 100;
  for (int round = 0; round < 10; ++round) {
    v = train_candidate(v, store, margin, threshold, cfg, 1 + round);
    const double now = loss(v, store, margin, threshold, cfg).total;
    CHECK(now <= prev * 1.05 + 1e-12);
    prev = now;
  }
  CHECK(prev < initial);

  // bit-identical per seed, also with minibatches
  cfg.batch_size = 7;
  const Mlp a = train_candidate(v0, store, margin, threshold, cfg, 42);
  const Mlp b = train_candidate(v0, store, margin, threshold, cfg, 42);
  CHECK(a == b);
  const Mlp c = train_candidate(v0, store, margin, threshold, cfg, 43);
  CHECK_FALSE(a == c);
}

TEST_CASE("training reports divergence") {
  const SystemSpec spec = line_system(0.5, 0.01);
  const SampleStore store = init_samples(spec, zero_policy(1), build_grid(spec, 0.1), 3, 1);
  LearnerConfig cfg;
  cfg.epochs = 5;
  Mlp v = Mlp::constant(1, 0.0);
  v.mutable_layers()[0].weight(0, 0) = 1e308;
  v.mutable_layers()[0].bias[0] = 1e308;
  CHECK_THROWS_AS(train_candidate(v, store, 1e308, 1.0, cfg, 1), TrainingDiverged);
}

TEST_CASE("loss is nonnegative and zero only with every hinge inactive") {
  auto [spec, pol] = make_benchmark("2d-system");
  const SampleStore store = init_samples(spec, pol, build_grid(spec, 0.1), 5, 9);
  LearnerConfig cfg;
  Rng rng(10);
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<int> sizes{2, 8, 1};
    const Mlp v = Mlp::random(sizes, rng);
    const LossTerms t = loss(v, store, rng.uniform(-0.1, 0.1), rng.uniform(0.0, 3.0), cfg);
    CHECK(t.rsm >= 0.0);
    CHECK(t.lipschitz >= 0.0);
    CHECK(t.total >= 0.0);
  }
}

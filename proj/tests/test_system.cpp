#include "rsm/error.hpp"
#include "rsm/system.hpp"

#include <doctest.h>

#include <cmath>

using namespace rsm;

namespace {

Vec v2(double a, double b) { return Eigen::Vector2d(a, b); }

Policy gain_policy(double k1, double k2) { return Policy(AnalyticPolicy{Eigen::RowVector2d(k1, k2)}); }

}  // namespace

TEST_CASE("2d step examples") {
  auto [spec, pol] = make_benchmark("2d-system");
  const Policy zero = gain_policy(0.0, 0.0);
  const Vec x0 = step(spec, zero, v2(0, 0), v2(0, 0));
  CHECK(x0[0] == 0.0);
  CHECK(x0[1] == 0.0);

  // gain chosen so that pi(x) = 0.5 at x = (0.1, 0.2)
  const Policy half = gain_policy(5.0, 0.0);
  const Vec x1 = step(spec, half, v2(0.1, 0.2), v2(0, 0));
  CHECK(x1[0] == doctest::Approx(0.334).epsilon(1e-12));
  CHECK(x1[1] == doctest::Approx(0.43).epsilon(1e-12));
  const Vec x2 = step(spec, half, v2(0.1, 0.2), v2(1, 1));
  CHECK(x2[0] == doctest::Approx(0.349).epsilon(1e-12));
  CHECK(x2[1] == doctest::Approx(0.435).epsilon(1e-12));
}

TEST_CASE("step rejects dimension mismatch") {
  auto [spec, pol] = make_benchmark("2d-system");
  CHECK_THROWS_AS(step(spec, pol, Vec::Zero(3), v2(0, 0)), InvalidInput);
  CHECK_THROWS_AS(step(spec, pol, v2(0, 0), Vec::Zero(1)), InvalidInput);
}

TEST_CASE("clip_action") {
  CHECK(clip_action(2.0) == 1.0);
  CHECK(clip_action(-3.0) == -1.0);
  CHECK(clip_action(0.5) == 0.5);
}

TEST_CASE("noise samples stay in the support and match moments") {
  TriangularNoise unit{Vec::Ones(1)};
  TriangularNoise scaled{v2(0.015, 0.005)};
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) {
    const Vec w = sample_noise(scaled, rng);
    CHECK(std::abs(w[0]) <= 0.015);
    CHECK(std::abs(w[1]) <= 0.005);
  }
  Rng rng2(7);
  const int n = 100000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = sample_noise(unit, rng2)[0];
    sum += z;
    sq += z * z;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  // integral of x^2 (1 - |x|) over [-1, 1]
  CHECK(std::abs(var - 1.0 / 6.0) < 0.01);
}

TEST_CASE("noise_cdf examples") {
  TriangularNoise unit{Vec::Ones(1)};
  CHECK(noise_cdf(unit, 0, 0.0) == doctest::Approx(0.5));
  CHECK(noise_cdf(unit, 0, 1.0) == 1.0);
  CHECK(noise_cdf(unit, 0, 0.5) == doctest::Approx(0.875));
  CHECK(noise_cdf(unit, 0, -2.0) == 0.0);
  CHECK(noise_cdf(unit, 0, 3.0) == 1.0);
  double prev = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double c = noise_cdf(unit, 0, -2.0 + 0.01 * i);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("empirical CDF of samples matches noise_cdf") {
  TriangularNoise noise{Vec::Constant(1, 0.3)};
  Rng rng(99);
  const int n = 100000;
  std::vector<double> s(n);
  for (auto& z : s) z = sample_noise(noise, rng)[0];
  for (int g = 0; g <= 20; ++g) {
    const double x = -0.3 + 0.03 * g;
    const double emp = static_cast<double>(std::count_if(s.begin(), s.end(), [x](double z) { return z <= x; })) / n;
    CHECK(std::abs(emp - noise_cdf(noise, 0, x)) < 0.01);
  }
}

TEST_CASE("benchmarks") {
  auto [pend, ppol] = make_benchmark("inverted-pendulum");
  CHECK(pend.parameters.at("dt") == 0.05);
  CHECK(pend.parameters.at("gravity") == 10.0);
  CHECK(pend.parameters.at("mass") == 0.15);
  CHECK(pend.parameters.at("length") == 0.5);
  CHECK(pend.parameters.at("damping") == 0.1);
  const Vec z = pend.dynamics(v2(0, 0), Vec::Zero(1), v2(0, 0));
  CHECK(z[0] == 0.0);
  CHECK(z[1] == 0.0);

  auto [sys, spol] = make_benchmark("2d-system");
  Mat joint(2, 5);
  joint << 1.0, 0.045, 0.45, 0.015, 0.0, 0.0, 0.9, 0.5, 0.0, 0.005;
  double lf = 0.0;
  for (int c = 0; c < 5; ++c) lf = std::max(lf, std::abs(joint(0, c)) + std::abs(joint(1, c)));
  CHECK(sys.lipschitz_f == doctest::Approx(lf).epsilon(1e-15));
  CHECK(sys.noise_map(0, 0) == 0.015);
  CHECK(sys.noise_map(1, 1) == 0.005);

  CHECK_THROWS_AS(make_benchmark("cartpole"), ConfigError);
  CHECK_NOTHROW(sys.validate());
  CHECK_NOTHROW(pend.validate());
}

TEST_CASE("pendulum dynamics against a direct transcription") {
  auto [spec, pol] = make_benchmark("inverted-pendulum");
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec x = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    const double u = rng.uniform(-2.0, 2.0);
    const Vec w = v2(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double g = std::max(std::min(u, 1.0), -1.0);
    const double vel = (1 - 0.1) * x[1] +
                       0.05 * (-1.5 * 10.0 * std::sin(x[0] + M_PI) / (2 * 0.5) + 3.0 / (0.15 * 0.25) * 2 * g) +
                       0.002 * w[0];
    const double ang = x[0] + 0.05 * vel + 0.005 * w[1];
    const Vec got = spec.dynamics(x, Vec::Constant(1, u), w);
    CHECK(got[0] == doctest::Approx(ang).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(vel).epsilon(1e-12));
  }
}

TEST_CASE("interval extensions are sound") {
  for (const char* name : {"2d-system", "inverted-pendulum"}) {
    auto [spec, pol] = make_benchmark(name);
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
      const Vec x = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      const Vec u = pol.act(x);
      const double a = rng.uniform(-1, 1), b = rng.uniform(-1, 1);
      const double c = rng.uniform(-1, 1), d = rng.uniform(-1, 1);
      const Box wbox(v2(std::min(a, b), std::min(c, d)), v2(std::max(a, b), std::max(c, d)));
      const Vec w = wbox.lo() + (wbox.hi() - wbox.lo()).cwiseProduct(v2(rng.uniform(), rng.uniform()));
      const Box ext = spec.dynamics_interval_extension(x, u, wbox);
      CHECK(ext.contains(spec.dynamics(x, u, w)));
    }
  }
}

TEST_CASE("box extensions are sound") {
  for (const char* name : {"2d-system", "inverted-pendulum"}) {
    auto [spec, pol] = make_benchmark(name);
    Rng rng(12);
    for (int i = 0; i < 2000; ++i) {
      const Vec c = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      const Vec r = v2(rng.uniform(0, 0.1), rng.uniform(0, 0.1));
      const Box xbox(c - r, c + r);
      const Box ext = spec.dynamics_box_extension(xbox, pol.act(xbox), spec.noise.support());
      for (int j = 0; j < 10; ++j) {
        const Vec x = xbox.lo() + (xbox.hi() - xbox.lo()).cwiseProduct(v2(rng.uniform(), rng.uniform()));
        CHECK(ext.contains(step(spec, pol, x, sample_noise(spec.noise, rng))));
      }
    }
  }
}

TEST_CASE("noise enters additively through noise_map") {
  for (const char* name : {"2d-system", "inverted-pendulum"}) {
    auto [spec, pol] = make_benchmark(name);
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const Vec x = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      const Vec w = sample_noise(spec.noise, rng);
      const Vec diff = step(spec, pol, x, w) - step(spec, pol, x, v2(0, 0));
      const Vec expected = spec.noise_map * w;
      CHECK((diff - expected).cwiseAbs().maxCoeff() < 1e-15);
    }
  }
}

TEST_CASE("declared L_f bounds finite differences") {
  for (const char* name : {"2d-system", "inverted-pendulum"}) {
    auto [spec, pol] = make_benchmark(name);
    Rng rng(8);
    for (int i = 0; i < 10000; ++i) {
      const Vec xa = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      const Vec xb = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      const Vec ua = Vec::Constant(1, rng.uniform(-1, 1));
      const Vec ub = Vec::Constant(1, rng.uniform(-1, 1));
      const Vec wa = v2(rng.uniform(-1, 1), rng.uniform(-1, 1));
      const Vec wb = v2(rng.uniform(-1, 1), rng.uniform(-1, 1));
      const double lhs = (spec.dynamics(xa, ua, wa) - spec.dynamics(xb, ub, wb)).lpNorm<1>();
      const double dist = (xa - xb).lpNorm<1>() + (ua - ub).lpNorm<1>() + (wa - wb).lpNorm<1>();
      CHECK(lhs <= spec.lipschitz_f * dist * (1 + 1e-12));
    }
  }
}

TEST_CASE("declared policy Lipschitz constants bound slopes") {
  for (const char* name : {"2d-system", "inverted-pendulum"}) {
    auto [spec, pol] = make_benchmark(name);
    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
      const Vec a = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      const Vec b = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      CHECK((pol.act(a) - pol.act(b)).lpNorm<1>() <= pol.lipschitz() * (a - b).lpNorm<1>() * (1 + 1e-12));
    }
  }
}

TEST_CASE("validate rejects a stabilization set outside the state space") {
  auto [spec, pol] = make_benchmark("2d-system");
  spec.stab_set = Box(v2(0.4, 0.4), v2(0.6, 0.6));
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec.stab_set = Box(v2(0.0, 0.0), v2(0.0, 0.1));
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("displacement extensions are sound") {
  for (const char* name : {"2d-system", "inverted-pendulum"}) {
    auto [spec, pol] = make_benchmark(name);
    REQUIRE(spec.displacement_extension);
    Rng rng(13);
    for (int i = 0; i < 2000; ++i) {
      const Vec c = v2(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
      const Vec r = v2(rng.uniform(0, 0.05), rng.uniform(0, 0.05));
      const Box xbox(c - r, c + r);
      const Box ext = spec.displacement_extension(xbox, pol.act(xbox), spec.noise.support());
      for (int j = 0; j < 10; ++j) {
        const Vec x = xbox.lo() + (xbox.hi() - xbox.lo()).cwiseProduct(v2(rng.uniform(), rng.uniform()));
        CHECK(ext.contains(step(spec, pol, x, sample_noise(spec.noise, rng)) - x));
      }
    }
  }
}

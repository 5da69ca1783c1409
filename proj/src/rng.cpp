#include "rsm/rng.hpp"

#include <cmath>
#include <numbers>

namespace rsm {

std::uint64_t Rng::mix(std::uint64_t z) {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng Rng::split(std::uint64_t stream) const {
  return Rng(mix(key_ ^ mix(stream + 0x3c6ef372fe94f82bULL)), 0);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t c = counter_++;
  return mix(key_ + mix(c));
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::triangular() {
  // inverse CDF of the unit triangular law
  const double u = uniform();
  if (u < 0.5) return std::sqrt(2.0 * u) - 1.0;
  return 1.0 - std::sqrt(2.0 * (1.0 - u));
}

}  // namespace rsm

#pragma once

#include <cstdint>

namespace rsm {

/// Counter-based pseudo random stream.
///
/// A stream is identified by a 64-bit key; the n-th draw is a pure function
/// of (key, n), so streams can be split into independent children without
/// sharing state. Two streams built from the same seed produce identical
/// sequences on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  /// Independent child stream; the parent is left untouched.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal (Box-Muller, one value per call).
  double normal();
  /// Sample of the unit triangular law with density 1 - |z| on [-1, 1].
  double triangular();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace rsm

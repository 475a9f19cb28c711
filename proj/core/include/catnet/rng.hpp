// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace catnet {

/// SplitMix64 finalizer; used to derive independent substream keys.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Hashes an ordered tuple of integers into a single 64-bit key.
std::uint64_t derive_key(std::initializer_list<std::uint64_t> parts) noexcept;

/// Seeded generator with platform-independent distributions (the std
/// distributions are implementation-defined, the engine is not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Substream keyed by (seed, a, b); streams for distinct keys are independent
  /// and can be generated in any order.
  static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return Rng(derive_key({seed, a, b}));
  }

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace catnet

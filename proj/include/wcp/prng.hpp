#pragma once

#include <cstdint>

namespace wcp {

/// Counter-based 64-bit generator: draw i of a stream with seed s is
/// splitmix64_finalize(s + (i + 1) * 0x9E3779B97F4A7C15). Only integer
/// arithmetic is involved, so streams are identical on every platform.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Integer uniform on [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller (consumes two draws per call).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64_finalize(std::uint64_t z);

/// Derive an independent stream seed from a parent seed and a tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

}  // namespace wcp

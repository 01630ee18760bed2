#ifndef FUZZYSEG_RNG_HPP
#define FUZZYSEG_RNG_HPP

#include <cstdint>

namespace fuzzyseg {

/// Counter-based generator: draw i of stream s under seed k is
/// splitmix64(k + 0x9E3779B97F4A7C15 * (s * 2^32 + i + 1)). Reproducible on any
/// platform, and independent streams never share state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {}

  static std::uint64_t mix(std::uint64_t z);

  /// Raw 64-bit draw at an explicit counter position (does not advance).
  std::uint64_t at(std::uint64_t counter) const;

  std::uint64_t next_u64() { return at(counter_++); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal();
  /// Poisson(mean): multiplication method below 10, transformed rejection (PTRS) above.
  std::uint64_t poisson(double mean);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace fuzzyseg

#endif  // FUZZYSEG_RNG_HPP

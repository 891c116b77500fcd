#pragma once

#include <cstdint>
#include <limits>

namespace qkdlink {

/// Mixes a 64-bit value through the SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent seed for a sub-stream (sweep point, chunk, direction).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  return mix64(seed ^ mix64(salt + 0x9e3779b97f4a7c15ULL));
}

/// Counter-keyed SplitMix64 stream.
///
/// A stream is addressed by (seed, stream id), so slot i of a Monte Carlo run
/// can be regenerated without replaying slots 0..i-1. This is what makes the
/// engine's results independent of how slot ranges are split across workers.
///
/// All samplers are implemented here rather than with <random> distributions,
/// whose output is implementation-defined; streams are bit-identical across
/// standard libraries.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : state_(derive_seed(seed, stream)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal (Box-Muller, one value per call).
  double normal();

  /// Poisson sample. Inversion below mean 30, PTRS rejection above.
  std::uint64_t poisson(double mean);

 private:
  std::uint64_t state_;
};

}  // namespace qkdlink

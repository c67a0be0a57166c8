#pragma once

#include <cstdint>

namespace rpolab {

// Counter-based 64-bit generator (SplitMix64).  Each draw hashes an
// incrementing counter, so the i-th output is a pure function of
// (seed, stream, i).  That makes every experiment cell reproducible
// bit-for-bit on any platform and lets parallel sweep cells own
// non-overlapping streams without shared state.
//
// Stream splitting: stream(k) re-keys the counter with a hash of
// (base seed, k).  Distinct k give statistically independent sequences;
// the derivation is stationary, so splitting is itself reproducible.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  // Next 64 uniform bits.
  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).  Rejection keeps the draw unbiased.
  int next_below(int n) {
    const std::uint64_t bound = ~0ull - ~0ull % static_cast<std::uint64_t>(n);
    std::uint64_t u;
    do {
      u = next_u64();
    } while (u >= bound);
    return static_cast<int>(u % static_cast<std::uint64_t>(n));
  }

  // Derive an independent generator for substream `k` of this generator's
  // current key.  Does not advance this generator.
  SplitMix64 stream(std::uint64_t k) const {
    return SplitMix64(mix(state_ ^ mix(k ^ 0x6a09e667f3bcc909ull)));
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdull;
    z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ull;
    return z ^ (z >> 33);
  }

  std::uint64_t state_;
};

}  // namespace rpolab

#pragma once

#include <array>
#include <cstdint>

namespace consensus_kit {

/// SplitMix64 (Steele, Lea, Flood). Used for seeding and seed derivation.
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman, Vigna). State words s[0..3] are the first four
/// SplitMix64 outputs of the seed.
///   result = rotl(s[1] * 5, 7) * 9
///   t = s[1] << 17
///   s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3]
///   s[2] ^= t; s[3] = rotl(s[3], 45)
class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::uint64_t seed);

  std::uint64_t next();

  /// (next() >> 11) * 2^-53, in [0, 1).
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// True with probability p.
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::array<std::uint64_t, 4> s_;
};

/// First SplitMix64 output of (seed XOR index). Per-run and per-stream seeds
/// come from here, so run r never depends on how many runs precede it.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace consensus_kit

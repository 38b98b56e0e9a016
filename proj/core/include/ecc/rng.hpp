#pragma once

#include <cstdint>
#include <random>

namespace ecc {

// Deterministic random source with a pinned stream layout so that seeded
// results are reproducible across platforms and releases:
//   engine    : std::mt19937_64 seeded directly with `seed`
//   uniform01 : (next_u64() >> 11) * 2^-53, values in [0, 1)
//   gaussian  : Box-Muller on the pair (1 - u1, u2); cosine branch returned
//               first, sine branch cached as the spare
// std::mt19937_64 output is fully specified by the standard, so the whole
// stream is implementation independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent substream `stream` of a base seed (splitmix64 mixing).
  static Rng split(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double gaussian();

  // Fair coin; one engine draw per bit.
  int bit() { return static_cast<int>(next_u64() & 1u); }

  // Uniform integer in [0, bound); modulo reduction (bias is irrelevant at
  // the bounds used here and determinism is the contract that matters).
  std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// splitmix64 step; used for seed derivation.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace ecc

#pragma once

#include <cstdint>
#include <vector>

#include "ecc/gf2.hpp"
#include "ecc/rng.hpp"

namespace ecc {

// One BPSK/AWGN transmission, kept mostly for tests and tooling; the hot
// paths work on raw vectors.
struct ChannelSample {
  BitVec x;                    // codeword
  std::vector<double> x_mod;   // 1 - 2x
  std::vector<double> y;       // x_mod + noise
  double ebno_db = 0.0;
  double sigma = 0.0;
};

// Bipolar map 0 -> +1, 1 -> -1, elementwise.
std::vector<double> modulate(const BitVec& x);

// Hard bit of a real value; sign(0) := +1 so bin(0) = 0.
inline std::uint8_t hard_bit(double v) { return v < 0.0 ? 1 : 0; }
BitVec hard_bits(const std::vector<double>& y);

// Noise std-dev for a normalized SNR (Eb/N0 in dB) at rate k/n, unit symbol
// energy: sigma = (2 * (k/n) * 10^(ebno/10))^-1/2.
double noise_sigma(double ebno_db, std::size_t k, std::size_t n);

// y = x_mod + sigma * g, g iid standard normal from `rng`.
std::vector<double> transmit(const std::vector<double>& x_mod, double sigma, Rng& rng);

// Hard bits of the multiplicative noise: z[i] = 1 iff sign(y[i]) != 1-2x[i].
// Equals bin(y) XOR x; this is the decoder's training target.
BitVec noise_target(const std::vector<double>& y, const BitVec& x);

ChannelSample transmit_codeword(const BitVec& x, double ebno_db, std::size_t k, Rng& rng);

}  // namespace ecc

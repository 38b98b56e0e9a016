#include "ecc/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace ecc {

std::vector<double> modulate(const BitVec& x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 1) throw std::invalid_argument("modulate: input is not binary");
    out[i] = 1.0 - 2.0 * static_cast<double>(x[i]);
  }
  return out;
}

BitVec hard_bits(const std::vector<double>& y) {
  BitVec out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = hard_bit(y[i]);
  return out;
}

double noise_sigma(double ebno_db, std::size_t k, std::size_t n) {
  if (k == 0 || n == 0) throw std::invalid_argument("noise_sigma: nonpositive rate");
  const double rate = static_cast<double>(k) / static_cast<double>(n);
  return 1.0 / std::sqrt(2.0 * rate * std::pow(10.0, ebno_db / 10.0));
}

std::vector<double> transmit(const std::vector<double>& x_mod, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("transmit: negative sigma");
  std::vector<double> y(x_mod.size());
  for (std::size_t i = 0; i < x_mod.size(); ++i) y[i] = x_mod[i] + sigma * rng.gaussian();
  return y;
}

BitVec noise_target(const std::vector<double>& y, const BitVec& x) {
  if (y.size() != x.size()) throw std::invalid_argument("noise_target: length mismatch");
  BitVec z(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) z[i] = hard_bit(y[i]) ^ x[i];
  return z;
}

ChannelSample transmit_codeword(const BitVec& x, double ebno_db, std::size_t k, Rng& rng) {
  ChannelSample s;
  s.x = x;
  s.x_mod = modulate(x);
  s.ebno_db = ebno_db;
  s.sigma = noise_sigma(ebno_db, k, x.size());
  s.y = transmit(s.x_mod, s.sigma, rng);
  return s;
}

}  // namespace ecc

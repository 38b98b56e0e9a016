#include "ecc/classic_decoders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ecc/channel.hpp"

namespace ecc {

namespace {

constexpr double kTanhClamp = 15.0;  // keeps atanh well away from +-1

double clamped_tanh_half(double m) {
  const double a = std::clamp(m * 0.5, -kTanhClamp, kTanhClamp);
  return std::tanh(a);
}

}  // namespace

TannerGraph::TannerGraph(const BinaryMatrix& h_in) : h(h_in) {
  n_vars = h.cols();
  n_checks = h.rows();
  check_begin.assign(n_checks + 1, 0);
  for (std::size_t c = 0; c < n_checks; ++c)
    for (std::size_t v = 0; v < n_vars; ++v)
      if (h.get(c, v)) ++check_begin[c + 1];
  for (std::size_t c = 0; c < n_checks; ++c) check_begin[c + 1] += check_begin[c];
  n_edges = check_begin[n_checks];

  check_of.resize(n_edges);
  var_of.resize(n_edges);
  std::size_t e = 0;
  for (std::size_t c = 0; c < n_checks; ++c)
    for (std::size_t v = 0; v < n_vars; ++v)
      if (h.get(c, v)) {
        check_of[e] = static_cast<std::uint32_t>(c);
        var_of[e] = static_cast<std::uint32_t>(v);
        ++e;
      }

  var_edges_begin.assign(n_vars + 1, 0);
  for (std::size_t i = 0; i < n_edges; ++i) ++var_edges_begin[var_of[i] + 1];
  for (std::size_t v = 0; v < n_vars; ++v) var_edges_begin[v + 1] += var_edges_begin[v];
  var_edges.resize(n_edges);
  std::vector<std::uint32_t> cursor(var_edges_begin.begin(), var_edges_begin.end() - 1);
  for (std::size_t i = 0; i < n_edges; ++i) var_edges[cursor[var_of[i]]++] = static_cast<std::uint32_t>(i);
}

BpResult bp_decode(const TannerGraph& g, const std::vector<double>& llr, std::size_t iterations) {
  if (llr.size() != g.n_vars) throw std::invalid_argument("bp_decode: LLR length mismatch");
  if (iterations < 1) throw std::invalid_argument("bp_decode: iterations must be >= 1");

  std::vector<double> v2c(g.n_edges);
  std::vector<double> c2v(g.n_edges, 0.0);
  for (std::size_t e = 0; e < g.n_edges; ++e) v2c[e] = llr[g.var_of[e]];

  BpResult res;
  res.soft_llr.assign(g.n_vars, 0.0);
  res.hard.assign(g.n_vars, 0);

  std::vector<double> fwd, bwd;
  for (std::size_t it = 1; it <= iterations; ++it) {
    // Check-node update with prefix/suffix tanh products.
    for (std::size_t c = 0; c < g.n_checks; ++c) {
      const std::size_t b = g.check_begin[c];
      const std::size_t deg = g.check_begin[c + 1] - b;
      if (deg == 0) continue;
      fwd.assign(deg, 0.0);
      bwd.assign(deg, 0.0);
      fwd[0] = clamped_tanh_half(v2c[b]);
      for (std::size_t j = 1; j < deg; ++j) fwd[j] = fwd[j - 1] * clamped_tanh_half(v2c[b + j]);
      bwd[deg - 1] = clamped_tanh_half(v2c[b + deg - 1]);
      for (std::size_t j = deg - 1; j-- > 0;) bwd[j] = bwd[j + 1] * clamped_tanh_half(v2c[b + j]);
      for (std::size_t j = 0; j < deg; ++j) {
        double prod = 1.0;
        if (j > 0) prod *= fwd[j - 1];
        if (j + 1 < deg) prod *= bwd[j + 1];
        prod = std::clamp(prod, -0.999999999999, 0.999999999999);
        c2v[b + j] = 2.0 * std::atanh(prod);
      }
    }

    // Variable-node update and posterior.
    bool all_ok = true;
    for (std::size_t v = 0; v < g.n_vars; ++v) {
      double total = llr[v];
      for (std::size_t i = g.var_edges_begin[v]; i < g.var_edges_begin[v + 1]; ++i)
        total += c2v[g.var_edges[i]];
      res.soft_llr[v] = total;
      res.hard[v] = total < 0.0 ? 1 : 0;
      for (std::size_t i = g.var_edges_begin[v]; i < g.var_edges_begin[v + 1]; ++i) {
        const std::uint32_t e = g.var_edges[i];
        v2c[e] = total - c2v[e];
      }
    }

    for (std::size_t c = 0; c < g.n_checks && all_ok; ++c) {
      std::uint8_t parity = 0;
      for (std::size_t e = g.check_begin[c]; e < g.check_begin[c + 1]; ++e)
        parity ^= res.hard[g.var_of[e]];
      all_ok = parity == 0;
    }
    res.iterations_run = it;
    if (all_ok) {
      res.syndrome_ok = true;
      break;
    }
  }
  if (!res.syndrome_ok) {
    bool ok = true;
    for (std::size_t c = 0; c < g.n_checks && ok; ++c) {
      std::uint8_t parity = 0;
      for (std::size_t e = g.check_begin[c]; e < g.check_begin[c + 1]; ++e)
        parity ^= res.hard[g.var_of[e]];
      ok = parity == 0;
    }
    res.syndrome_ok = ok;
  }
  return res;
}

BpResult bp_decode(const BinaryMatrix& h, const std::vector<double>& llr, std::size_t iterations) {
  return bp_decode(TannerGraph(h), llr, iterations);
}

std::vector<double> awgn_llr(const std::vector<double>& y, double sigma) {
  if (sigma <= 0.0) throw std::invalid_argument("awgn_llr: sigma must be positive");
  std::vector<double> llr(y.size());
  const double s = 2.0 / (sigma * sigma);
  for (std::size_t i = 0; i < y.size(); ++i) llr[i] = s * y[i];
  return llr;
}

MlResult ml_decode_rows(const BinaryMatrix& g, const std::vector<double>& y, std::size_t max_k) {
  const std::size_t k = g.rows();
  const std::size_t n = g.cols();
  if (y.size() != n) throw std::invalid_argument("ml_decode: received length mismatch");
  if (k > max_k)
    throw std::invalid_argument("ml_decode: k=" + std::to_string(k) + " exceeds enumeration cap " +
                                std::to_string(max_k));

  // argmin ||y - (1-2c)||^2 == argmax <y, 1-2c>; Gray-code walk flips one
  // message bit per step, toggling one generator row in the codeword.
  std::vector<std::vector<std::uint32_t>> row_support(k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t c = 0; c < n; ++c)
      if (g.get(j, c)) row_support[j].push_back(static_cast<std::uint32_t>(c));

  BitVec cw(n, 0);
  double score = 0.0;
  for (std::size_t i = 0; i < n; ++i) score += y[i];

  double best_score = score;
  std::uint64_t best_msg = 0;
  std::uint64_t gray = 0;
  const std::uint64_t total = 1ull << k;
  for (std::uint64_t idx = 1; idx < total; ++idx) {
    const std::uint64_t next_gray = idx ^ (idx >> 1);
    const std::uint64_t changed = gray ^ next_gray;
    std::size_t bit = 0;
    while (!((changed >> bit) & 1ull)) ++bit;
    gray = next_gray;
    for (const std::uint32_t c : row_support[bit]) {
      // sign of the modulated bit flips: delta = -2 * y_c * (1-2c_old)
      score -= 2.0 * y[c] * (1.0 - 2.0 * static_cast<double>(cw[c]));
      cw[c] ^= 1;
    }
    if (score > best_score || (score == best_score && gray < best_msg)) {
      best_score = score;
      best_msg = gray;
    }
  }

  MlResult res;
  res.message.assign(k, 0);
  for (std::size_t j = 0; j < k; ++j) res.message[j] = static_cast<std::uint8_t>((best_msg >> j) & 1u);
  res.codeword.assign(n, 0);
  for (std::size_t j = 0; j < k; ++j)
    if (res.message[j])
      for (const std::uint32_t c : row_support[j]) res.codeword[c] ^= 1;
  return res;
}

MlResult ml_decode(const Code& code, const std::vector<double>& y, std::size_t max_k) {
  return ml_decode_rows(code.G, y, max_k);
}

bool hard_syndrome_ok(const BinaryMatrix& h, const std::vector<double>& y) {
  BitVec bits(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) bits[i] = hard_bit(y[i]);
  const BitVec s = syndrome(h, bits);
  return std::all_of(s.begin(), s.end(), [](std::uint8_t b) { return b == 0; });
}

}  // namespace ecc

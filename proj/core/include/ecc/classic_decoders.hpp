#pragma once

#include <cstdint>
#include <vector>

#include "ecc/gf2.hpp"

namespace ecc {

// Bipartite variable/check adjacency built from the on-bits of H.
// Edges are stored flat; prefix/suffix buffers let the check update exclude
// the target edge without divisions.
struct TannerGraph {
  explicit TannerGraph(const BinaryMatrix& h);

  std::size_t n_vars = 0;
  std::size_t n_checks = 0;
  std::size_t n_edges = 0;
  // edge e: (check_of[e], var_of[e]); edges grouped by check, ascending var.
  std::vector<std::uint32_t> check_of;
  std::vector<std::uint32_t> var_of;
  std::vector<std::uint32_t> check_begin;        // size n_checks + 1
  std::vector<std::uint32_t> var_edges_begin;    // size n_vars + 1
  std::vector<std::uint32_t> var_edges;          // edge ids grouped by variable
  BinaryMatrix h;
};

struct BpResult {
  std::vector<double> soft_llr;  // posterior LLR per variable
  BitVec hard;                   // hard[i] = 1 iff soft_llr[i] < 0
  bool syndrome_ok = false;
  std::size_t iterations_run = 0;
};

// Flooding-schedule sum-product on the Tanner graph of H. Check update is
// 2 atanh(prod tanh(m/2)) with |m/2| clamped to 15; variable update sums
// channel and check messages; early exit once the hard decision satisfies
// all checks. For AWGN the channel LLR is 2y/sigma^2.
BpResult bp_decode(const TannerGraph& graph, const std::vector<double>& channel_llr,
                   std::size_t iterations);
BpResult bp_decode(const BinaryMatrix& h, const std::vector<double>& channel_llr,
                   std::size_t iterations);

std::vector<double> awgn_llr(const std::vector<double>& y, double sigma);

struct MlResult {
  BitVec message;   // length k
  BitVec codeword;  // length n
};

inline constexpr std::size_t kMlMaxMessageBits = 20;

// Exhaustive minimum-distance decoding over all 2^k codewords spanned by
// the rows of g (k x n). argmin ||y - (1-2c)||^2, ties broken by the
// smallest message index. Gray-code enumeration, O(2^k * row weight).
// Throws std::invalid_argument when k exceeds `max_k`.
MlResult ml_decode_rows(const BinaryMatrix& g, const std::vector<double>& y,
                        std::size_t max_k = kMlMaxMessageBits);
MlResult ml_decode(const Code& code, const std::vector<double>& y,
                   std::size_t max_k = kMlMaxMessageBits);

// True iff H bin(y) = 0.
bool hard_syndrome_ok(const BinaryMatrix& h, const std::vector<double>& y);

}  // namespace ecc

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ecc {

class Rng;

using BitVec = std::vector<std::uint8_t>;  // entries are 0 or 1

// Dense bit-packed matrix over GF(2), row major. Codes handled here are
// short (n <= 128 or so), so dense storage is the right trade.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  BinaryMatrix(std::size_t rows, std::size_t cols);

  static BinaryMatrix identity(std::size_t n);
  static BinaryMatrix from_rows(const std::vector<BitVec>& rows);
  static BinaryMatrix random(std::size_t rows, std::size_t cols, Rng& rng);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  int get(std::size_t r, std::size_t c) const {
    return static_cast<int>((words_[r * wpr_ + c / 64] >> (c % 64)) & 1u);
  }
  void set(std::size_t r, std::size_t c, int v);

  void xor_row_into(std::size_t src, std::size_t dst);  // row[dst] ^= row[src]
  void swap_rows(std::size_t a, std::size_t b);
  void swap_cols(std::size_t a, std::size_t b);

  BitVec row(std::size_t r) const;
  std::vector<BitVec> to_rows() const;
  BinaryMatrix transposed() const;

  // [this | right], row counts must match.
  BinaryMatrix hstack(const BinaryMatrix& right) const;
  // Column slice [begin, end).
  BinaryMatrix columns(std::size_t begin, std::size_t end) const;

  std::size_t count_ones() const;
  double density() const;
  bool is_zero_row(std::size_t r) const;

  bool operator==(const BinaryMatrix& other) const;
  bool operator!=(const BinaryMatrix& other) const { return !(*this == other); }

  // Word view of one row (wpr() words, tail bits zero).
  const std::uint64_t* row_words(std::size_t r) const { return words_.data() + r * wpr_; }
  std::uint64_t* row_words(std::size_t r) { return words_.data() + r * wpr_; }
  std::size_t wpr() const { return wpr_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t wpr_ = 0;  // words per row
  std::vector<std::uint64_t> words_;
};

// Standard-form code pair: G = [I_k | P], H = [P^T | I_{n-k}], G H^T = 0.
struct Code {
  std::size_t n = 0;
  std::size_t k = 0;
  BinaryMatrix P;  // k x (n-k)
  BinaryMatrix G;  // k x n
  BinaryMatrix H;  // (n-k) x n

  static Code from_parity_part(const BinaryMatrix& P);

  // Throws std::logic_error if the standard-form invariants do not hold.
  void validate() const;
};

struct RankDeficiencyError : std::runtime_error {
  RankDeficiencyError(std::size_t achieved, std::size_t expected)
      : std::runtime_error("matrix is rank deficient: rank " + std::to_string(achieved) +
                           " < " + std::to_string(expected)),
        achieved_rank(achieved),
        expected_rank(expected) {}
  std::size_t achieved_rank;
  std::size_t expected_rank;
};

struct StandardizeResult {
  Code code;
  // column_permutation[j] = index in the input matrix of the column that
  // ends up at position j of the standardized matrix.
  std::vector<std::size_t> column_permutation;
};

// Exact (A * B) mod 2. Throws std::invalid_argument on dimension mismatch.
BinaryMatrix gf2_matmul(const BinaryMatrix& a, const BinaryMatrix& b);

// Row reduction plus column swaps onto H = [P^T | I_{n-k}]. Pivots already
// sitting in the identity region are kept in place, so standard-form inputs
// come back unchanged with the identity permutation; otherwise the leftmost
// column with a usable pivot is swapped in. Throws RankDeficiencyError when
// the input rows are dependent.
StandardizeResult standardize(const BinaryMatrix& h_any);

// x = m G over GF(2); m has length k.
BitVec encode(const BitVec& m, const Code& code);

// s = H c over GF(2); c has length n.
BitVec syndrome(const Code& code, const BitVec& c);
BitVec syndrome(const BinaryMatrix& h, const BitVec& c);

std::size_t gf2_rank(const BinaryMatrix& m);

// Indices of a lexicographically-first maximal independent row subset.
std::vector<std::size_t> independent_rows(const BinaryMatrix& m);

// Basis of the null space of m, as rows of a ((cols - rank) x cols) matrix
// in the original column order: m * result^T = 0.
BinaryMatrix gf2_nullspace(const BinaryMatrix& m);

BitVec xor_bits(const BitVec& a, const BitVec& b);

}  // namespace ecc

#include "ecc/gf2.hpp"

#include <algorithm>
#include <bit>

#include "ecc/rng.hpp"

namespace ecc {

namespace {

std::size_t words_for(std::size_t cols) { return (cols + 63) / 64; }

std::uint64_t parity_and(const std::uint64_t* a, const std::uint64_t* b, std::size_t nwords) {
  std::uint64_t acc = 0;
  for (std::size_t w = 0; w < nwords; ++w) acc ^= a[w] & b[w];
  return static_cast<std::uint64_t>(std::popcount(acc)) & 1u;
}

}  // namespace

BinaryMatrix::BinaryMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), wpr_(words_for(cols)), words_(rows * wpr_, 0) {}

BinaryMatrix BinaryMatrix::identity(std::size_t n) {
  BinaryMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, i, 1);
  return m;
}

BinaryMatrix BinaryMatrix::from_rows(const std::vector<BitVec>& rows) {
  if (rows.empty()) return {};
  BinaryMatrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols_) throw std::invalid_argument("from_rows: ragged rows");
    for (std::size_t c = 0; c < m.cols_; ++c) m.set(r, c, rows[r][c]);
  }
  return m;
}

BinaryMatrix BinaryMatrix::random(std::size_t rows, std::size_t cols, Rng& rng) {
  BinaryMatrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m.set(r, c, rng.bit());
  return m;
}

void BinaryMatrix::set(std::size_t r, std::size_t c, int v) {
  std::uint64_t& w = words_[r * wpr_ + c / 64];
  const std::uint64_t mask = 1ull << (c % 64);
  if (v & 1)
    w |= mask;
  else
    w &= ~mask;
}

void BinaryMatrix::xor_row_into(std::size_t src, std::size_t dst) {
  std::uint64_t* d = row_words(dst);
  const std::uint64_t* s = row_words(src);
  for (std::size_t w = 0; w < wpr_; ++w) d[w] ^= s[w];
}

void BinaryMatrix::swap_rows(std::size_t a, std::size_t b) {
  if (a == b) return;
  std::swap_ranges(row_words(a), row_words(a) + wpr_, row_words(b));
}

void BinaryMatrix::swap_cols(std::size_t a, std::size_t b) {
  if (a == b) return;
  for (std::size_t r = 0; r < rows_; ++r) {
    const int va = get(r, a);
    const int vb = get(r, b);
    set(r, a, vb);
    set(r, b, va);
  }
}

BitVec BinaryMatrix::row(std::size_t r) const {
  BitVec out(cols_);
  for (std::size_t c = 0; c < cols_; ++c) out[c] = static_cast<std::uint8_t>(get(r, c));
  return out;
}

std::vector<BitVec> BinaryMatrix::to_rows() const {
  std::vector<BitVec> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = row(r);
  return out;
}

BinaryMatrix BinaryMatrix::transposed() const {
  BinaryMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c)
      if (get(r, c)) t.set(c, r, 1);
  return t;
}

BinaryMatrix BinaryMatrix::hstack(const BinaryMatrix& right) const {
  if (rows_ != right.rows_) throw std::invalid_argument("hstack: row count mismatch");
  BinaryMatrix m(rows_, cols_ + right.cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) m.set(r, c, get(r, c));
    for (std::size_t c = 0; c < right.cols_; ++c) m.set(r, cols_ + c, right.get(r, c));
  }
  return m;
}

BinaryMatrix BinaryMatrix::columns(std::size_t begin, std::size_t end) const {
  if (begin > end || end > cols_) throw std::invalid_argument("columns: bad range");
  BinaryMatrix m(rows_, end - begin);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = begin; c < end; ++c) m.set(r, c - begin, get(r, c));
  return m;
}

std::size_t BinaryMatrix::count_ones() const {
  std::size_t total = 0;
  for (const std::uint64_t w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

double BinaryMatrix::density() const {
  if (rows_ == 0 || cols_ == 0) return 0.0;
  return static_cast<double>(count_ones()) / static_cast<double>(rows_ * cols_);
}

bool BinaryMatrix::is_zero_row(std::size_t r) const {
  const std::uint64_t* w = row_words(r);
  for (std::size_t i = 0; i < wpr_; ++i)
    if (w[i]) return false;
  return true;
}

bool BinaryMatrix::operator==(const BinaryMatrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && words_ == other.words_;
}

BinaryMatrix gf2_matmul(const BinaryMatrix& a, const BinaryMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("gf2_matmul: inner dimension mismatch");
  BinaryMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::uint64_t* out = c.row_words(i);
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (!a.get(i, j)) continue;
      const std::uint64_t* src = b.row_words(j);
      for (std::size_t w = 0; w < c.wpr(); ++w) out[w] ^= src[w];
    }
  }
  return c;
}

Code Code::from_parity_part(const BinaryMatrix& p) {
  Code code;
  code.k = p.rows();
  code.n = p.rows() + p.cols();
  code.P = p;
  code.G = BinaryMatrix::identity(code.k).hstack(p);
  code.H = p.transposed().hstack(BinaryMatrix::identity(code.n - code.k));
  return code;
}

void Code::validate() const {
  if (G.rows() != k || G.cols() != n || H.rows() != n - k || H.cols() != n)
    throw std::logic_error("Code: shape mismatch");
  if (G != BinaryMatrix::identity(k).hstack(P)) throw std::logic_error("Code: G != [I|P]");
  if (H != P.transposed().hstack(BinaryMatrix::identity(n - k)))
    throw std::logic_error("Code: H != [P^T|I]");
  const BinaryMatrix prod = gf2_matmul(G, H.transposed());
  if (prod.count_ones() != 0) throw std::logic_error("Code: G H^T != 0");
}

StandardizeResult standardize(const BinaryMatrix& h_any) {
  const std::size_t m = h_any.rows();
  const std::size_t n = h_any.cols();
  if (m == 0 || n < m) throw std::invalid_argument("standardize: bad shape");
  const std::size_t k = n - m;

  BinaryMatrix w = h_any;
  std::vector<std::size_t> perm(n);
  for (std::size_t j = 0; j < n; ++j) perm[j] = j;

  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t target = k + r;
    // Prefer a pivot already in the identity position, else take the
    // leftmost column that still has one in the eliminable rows.
    std::size_t pivot_col = n;
    std::size_t pivot_row = m;
    for (std::size_t i = r; i < m && pivot_row == m; ++i)
      if (w.get(i, target)) {
        pivot_col = target;
        pivot_row = i;
      }
    if (pivot_row == m) {
      for (std::size_t j = 0; j < n && pivot_row == m; ++j) {
        if (j >= k && j <= target) continue;  // fixed identity columns and the empty target
        for (std::size_t i = r; i < m; ++i)
          if (w.get(i, j)) {
            pivot_col = j;
            pivot_row = i;
            break;
          }
      }
    }
    if (pivot_row == m) throw RankDeficiencyError(r, m);
    if (pivot_col != target) {
      w.swap_cols(pivot_col, target);
      std::swap(perm[pivot_col], perm[target]);
    }
    w.swap_rows(pivot_row, r);
    for (std::size_t i = 0; i < m; ++i)
      if (i != r && w.get(i, target)) w.xor_row_into(r, i);
  }

  StandardizeResult res;
  res.code = Code::from_parity_part(w.columns(0, k).transposed());
  res.column_permutation = std::move(perm);
  return res;
}

BitVec encode(const BitVec& m, const Code& code) {
  if (m.size() != code.k) throw std::invalid_argument("encode: message length mismatch");
  for (const auto b : m)
    if (b > 1) throw std::invalid_argument("encode: message is not binary");
  BitVec x(code.n, 0);
  for (std::size_t j = 0; j < code.k; ++j) {
    if (!m[j]) continue;
    for (std::size_t c = 0; c < code.n; ++c) x[c] ^= static_cast<std::uint8_t>(code.G.get(j, c));
  }
  return x;
}

BitVec syndrome(const BinaryMatrix& h, const BitVec& c) {
  if (c.size() != h.cols()) throw std::invalid_argument("syndrome: length mismatch");
  BinaryMatrix cv(1, h.cols());
  for (std::size_t j = 0; j < c.size(); ++j)
    if (c[j]) cv.set(0, j, 1);
  BitVec s(h.rows());
  for (std::size_t r = 0; r < h.rows(); ++r)
    s[r] = static_cast<std::uint8_t>(parity_and(h.row_words(r), cv.row_words(0), h.wpr()));
  return s;
}

BitVec syndrome(const Code& code, const BitVec& c) { return syndrome(code.H, c); }

std::size_t gf2_rank(const BinaryMatrix& m) { return independent_rows(m).size(); }

std::vector<std::size_t> independent_rows(const BinaryMatrix& m) {
  std::vector<std::size_t> chosen;
  BinaryMatrix basis(m.rows(), m.cols());
  std::vector<std::size_t> pivot_of;  // pivot column per basis row
  std::size_t nb = 0;
  std::vector<std::uint64_t> work(m.wpr());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::copy(m.row_words(r), m.row_words(r) + m.wpr(), work.begin());
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t p = pivot_of[b];
      if ((work[p / 64] >> (p % 64)) & 1u)
        for (std::size_t w = 0; w < m.wpr(); ++w) work[w] ^= basis.row_words(b)[w];
    }
    std::size_t pivot = m.cols();
    for (std::size_t c = 0; c < m.cols(); ++c)
      if ((work[c / 64] >> (c % 64)) & 1u) {
        pivot = c;
        break;
      }
    if (pivot == m.cols()) continue;
    std::copy(work.begin(), work.end(), basis.row_words(nb));
    pivot_of.push_back(pivot);
    ++nb;
    chosen.push_back(r);
  }
  return chosen;
}

BinaryMatrix gf2_nullspace(const BinaryMatrix& m) {
  // Gauss-Jordan with pivot bookkeeping, free columns generate the basis.
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  BinaryMatrix w = m;
  std::vector<std::size_t> pivot_col;
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t pr = rows;
    for (std::size_t i = r; i < rows; ++i)
      if (w.get(i, c)) {
        pr = i;
        break;
      }
    if (pr == rows) continue;
    w.swap_rows(pr, r);
    for (std::size_t i = 0; i < rows; ++i)
      if (i != r && w.get(i, c)) w.xor_row_into(r, i);
    pivot_col.push_back(c);
    ++r;
  }
  const std::size_t rank = r;
  std::vector<bool> is_pivot(cols, false);
  for (const auto c : pivot_col) is_pivot[c] = true;

  BinaryMatrix basis(cols - rank, cols);
  std::size_t out_row = 0;
  for (std::size_t free_c = 0; free_c < cols; ++free_c) {
    if (is_pivot[free_c]) continue;
    basis.set(out_row, free_c, 1);
    for (std::size_t p = 0; p < rank; ++p)
      if (w.get(p, free_c)) basis.set(out_row, pivot_col[p], 1);
    ++out_row;
  }
  return basis;
}

BitVec xor_bits(const BitVec& a, const BitVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("xor_bits: length mismatch");
  BitVec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] ^ b[i];
  return out;
}

}  // namespace ecc

// Generates the reference parity-check matrices shipped under data/codes/:
//   bch_31_16.alist   cyclic BCH, g(x) = m1(x) m3(x) m5(x) over GF(2^5)
//   ldpc_49_24.alist  quasi-cyclic array code, 4x7 grid of 7x7 circulants
//   polar_32_11.alist dual of the polar generator picked by Bhattacharyya
//                     ordering at the design SNR below
// Run with the output directory as the only argument.

#include <cstdint>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ecc/code_io.hpp"
#include "ecc/gf2.hpp"

namespace {

using ecc::BinaryMatrix;

// ---- GF(2) polynomials as bit masks (bit i = coefficient of x^i) ----

std::uint64_t poly_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  for (int i = 0; i < 64; ++i)
    if ((b >> i) & 1ull) r ^= a << i;
  return r;
}

int poly_deg(std::uint64_t p) {
  int d = -1;
  for (int i = 0; i < 64; ++i)
    if ((p >> i) & 1ull) d = i;
  return d;
}

std::uint64_t poly_div(std::uint64_t num, std::uint64_t den, std::uint64_t* rem_out) {
  std::uint64_t q = 0;
  const int dd = poly_deg(den);
  while (poly_deg(num) >= dd) {
    const int shift = poly_deg(num) - dd;
    q ^= 1ull << shift;
    num ^= den << shift;
  }
  if (rem_out) *rem_out = num;
  return q;
}

// ---- GF(2^5) with primitive polynomial x^5 + x^2 + 1 ----

constexpr unsigned kPrim = 0b100101;

unsigned gf32_mul(unsigned a, unsigned b) {
  unsigned r = 0;
  while (b) {
    if (b & 1u) r ^= a;
    a <<= 1;
    if (a & 0b100000u) a ^= kPrim;
    b >>= 1;
  }
  return r;
}

unsigned gf32_pow_alpha(unsigned e) {
  unsigned r = 1;
  for (unsigned i = 0; i < e % 31; ++i) r = gf32_mul(r, 0b10);  // alpha = x
  return r;
}

// Minimal polynomial of alpha^e: product of (x - alpha^j) over the
// conjugacy class {e, 2e, 4e, ...} mod 31. Coefficients land in GF(2).
std::uint64_t minimal_poly(unsigned e) {
  std::vector<unsigned> cls;
  unsigned j = e % 31;
  do {
    cls.push_back(j);
    j = (2 * j) % 31;
  } while (j != e % 31);

  std::vector<unsigned> coeffs{1};  // monic, coefficients in GF(32)
  for (const unsigned c : cls) {
    const unsigned root = gf32_pow_alpha(c);
    std::vector<unsigned> next(coeffs.size() + 1, 0);
    for (std::size_t i = 0; i < coeffs.size(); ++i) {
      next[i + 1] ^= coeffs[i];                 // x * coeff
      next[i] ^= gf32_mul(coeffs[i], root);     // root * coeff
    }
    coeffs = std::move(next);
  }
  std::uint64_t mask = 0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i] > 1) throw std::logic_error("minimal_poly: coefficient outside GF(2)");
    if (coeffs[i]) mask |= 1ull << i;
  }
  return mask;
}

// Cyclic-code parity check: rows are the n-k shifts of the reversed parity
// polynomial h(x) = (x^n - 1) / g(x).
BinaryMatrix cyclic_parity_check(std::uint64_t g, std::size_t n) {
  std::uint64_t rem = 0;
  const std::uint64_t xn1 = (1ull << n) | 1ull;
  const std::uint64_t h = poly_div(xn1, g, &rem);
  if (rem != 0) throw std::logic_error("cyclic_parity_check: g does not divide x^n-1");
  const int k = poly_deg(h);
  const std::size_t m = n - static_cast<std::size_t>(k);

  BinaryMatrix H(m, n);
  for (std::size_t r = 0; r < m; ++r)
    for (int i = 0; i <= k; ++i)
      if ((h >> i) & 1ull) H.set(r, r + static_cast<std::size_t>(k - i), 1);
  return H;
}

BinaryMatrix bch_31_16_parity() {
  const std::uint64_t g = poly_mul(poly_mul(minimal_poly(1), minimal_poly(3)), minimal_poly(5));
  if (poly_deg(g) != 15) throw std::logic_error("bch(31,16): unexpected generator degree");
  return cyclic_parity_check(g, 31);
}

// Array LDPC: j x q grid of p x p circulants, block (r, c) = P^{r*c} with
// P the single-step cyclic shift. Column weight j, row weight q; the rank
// of H is j*p - (j-1), giving k = n - rank = 24 for (j, p, q) = (4, 7, 7).
BinaryMatrix array_ldpc_parity(std::size_t j, std::size_t p, std::size_t q) {
  BinaryMatrix H(j * p, p * q);
  for (std::size_t br = 0; br < j; ++br)
    for (std::size_t bc = 0; bc < q; ++bc) {
      const std::size_t shift = (br * bc) % p;
      for (std::size_t i = 0; i < p; ++i)
        H.set(br * p + i, bc * p + (i + shift) % p, 1);
    }
  return H;
}

// Polar generator rows: G_N = F^{(x)m}, F = [[1,0],[1,1]]; row i has ones at
// columns j with j subset of i. Information set = k most reliable synthetic
// channels under the Bhattacharyya recursion z- = 2z - z^2, z+ = z^2 from
// z0 = exp(-R * 10^(design_ebno/10)).
BinaryMatrix polar_parity(std::size_t m_levels, std::size_t k, double design_ebno_db) {
  const std::size_t n = 1ull << m_levels;
  const double rate = static_cast<double>(k) / static_cast<double>(n);
  std::vector<double> z{std::exp(-rate * std::pow(10.0, design_ebno_db / 10.0))};
  for (std::size_t level = 0; level < m_levels; ++level) {
    std::vector<double> next(z.size() * 2);
    for (std::size_t i = 0; i < z.size(); ++i) {
      next[2 * i] = 2.0 * z[i] - z[i] * z[i];
      next[2 * i + 1] = z[i] * z[i];
    }
    z = std::move(next);
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (z[a] != z[b]) return z[a] < z[b];
    return a > b;  // prefer higher index (heavier row) on ties
  });

  std::vector<std::size_t> info(order.begin(), order.begin() + static_cast<long>(k));
  std::sort(info.begin(), info.end());

  BinaryMatrix G(k, n);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t i = info[r];
    for (std::size_t col = 0; col < n; ++col)
      if ((col & ~i) == 0) G.set(r, col, 1);
  }
  return ecc::gf2_nullspace(G);
}

void emit(const std::filesystem::path& dir, const std::string& name, const BinaryMatrix& h) {
  const auto path = dir / (name + ".alist");
  ecc::write_text_file(path, ecc::write_alist(h));
  std::printf("%s: %zux%zu, %zu ones\n", path.string().c_str(), h.rows(), h.cols(),
              h.count_ones());
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <output-dir>\n", argv[0]);
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);
  try {
    emit(dir, "bch_31_16", bch_31_16_parity());
    emit(dir, "ldpc_49_24", array_ldpc_parity(4, 7, 7));
    emit(dir, "polar_32_11", polar_parity(5, 11, 2.0));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

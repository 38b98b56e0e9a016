#include "ecc/code_param.hpp"

#include <cmath>

namespace ecc {

OmegaParam init_omega(const BinaryMatrix& omega0, double c, double clamp_bound) {
  if (c <= 0.0) throw std::invalid_argument("init_omega: scale must be positive");
  OmegaParam p;
  p.k = omega0.rows();
  p.nk = omega0.cols();
  p.init_scale = c;
  p.clamp_bound = clamp_bound;
  std::vector<double> vals(p.k * p.nk);
  for (std::size_t r = 0; r < p.k; ++r)
    for (std::size_t j = 0; j < p.nk; ++j)
      vals[r * p.nk + j] = c * (1.0 - 2.0 * static_cast<double>(omega0.get(r, j)));
  p.omega = ad::Tensor::param({p.k, p.nk}, std::move(vals));
  return p;
}

CodeViews assemble_views(const ad::Tensor& p_bits) {
  if (p_bits.rank() != 2) throw std::invalid_argument("assemble_views: P must be rank 2");
  CodeViews v;
  v.P = p_bits;
  v.k = p_bits.shape()[0];
  v.n = v.k + p_bits.shape()[1];
  const std::size_t nk = v.n - v.k;

  const ad::Tensor ik = ad::tensor_from(BinaryMatrix::identity(v.k));
  const ad::Tensor ink = ad::tensor_from(BinaryMatrix::identity(nk));
  const ad::Tensor g_parts[] = {ik, p_bits};
  v.G = ad::concat(g_parts, 1);
  const ad::Tensor h_parts[] = {ad::transpose(p_bits), ink};
  v.H = ad::concat(h_parts, 1);
  return v;
}

CodeViews realize(const OmegaParam& p, double tau) {
  return assemble_views(ad::ste_binarize(p.omega, tau));
}

ad::Tensor build_mask(const ad::Tensor& h_view) {
  if (h_view.rank() != 2) throw std::invalid_argument("build_mask: H must be rank 2");
  const ad::Tensor ht = ad::transpose(h_view);
  const ad::Tensor top_parts[] = {ad::matmul(ht, h_view), ht};
  const ad::Tensor bottom_parts[] = {h_view, ad::matmul(h_view, ht)};
  const ad::Tensor rows[] = {ad::concat(top_parts, 1), ad::concat(bottom_parts, 1)};
  return ad::concat(rows, 0);
}

void clamp(OmegaParam& p) {
  const double hi = std::nextafter(p.clamp_bound, 0.0);
  const double lo = -hi;
  for (double& v : p.omega.mutable_values()) v = std::clamp(v, lo, hi);
}

BinaryMatrix realized_parity(const OmegaParam& p) {
  BinaryMatrix m(p.k, p.nk);
  const auto& vals = p.omega.values();
  for (std::size_t r = 0; r < p.k; ++r)
    for (std::size_t j = 0; j < p.nk; ++j)
      if (vals[r * p.nk + j] < 0.0) m.set(r, j, 1);
  return m;
}

std::size_t parity_diff_bits(const BinaryMatrix& a, const BinaryMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("parity_diff_bits: shape mismatch");
  std::size_t diff = 0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) diff += a.get(r, c) != b.get(r, c);
  return diff;
}

}  // namespace ecc

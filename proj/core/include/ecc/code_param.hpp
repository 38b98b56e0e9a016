#pragma once

#include <cstdint>
#include <limits>

#include "ecc/autodiff.hpp"
#include "ecc/gf2.hpp"

namespace ecc {

// Differentiable views of a standard-form code. P carries the gradient; the
// identity blocks are constants, so every use of G or H feeds the same leaf.
struct CodeViews {
  ad::Tensor P;  // k x (n-k), values in {0,1}
  ad::Tensor G;  // [I_k | P]
  ad::Tensor H;  // [P^T | I_{n-k}]
  std::size_t n = 0;
  std::size_t k = 0;
};

// Trainable real-valued parity part; bin(omega) realizes the code.
struct OmegaParam {
  ad::Tensor omega;  // k x (n-k) leaf
  double init_scale = 0.01;
  double clamp_bound = 0.5;
  std::size_t k = 0;
  std::size_t nk = 0;  // n - k
};

// omega = c * (1 - 2 * omega0), so bin(omega) reproduces omega0 exactly and
// every entry starts with the same confidence c.
OmegaParam init_omega(const BinaryMatrix& omega0, double c = 0.01, double clamp_bound = 0.5);

// Builds G/H around an existing {0,1}-valued parity tensor.
CodeViews assemble_views(const ad::Tensor& p_bits);

// ste_binarize(omega, tau) -> standard-form views; default tau = infinity
// (the clamp keeps omega bounded instead).
CodeViews realize(const OmegaParam& p, double tau = std::numeric_limits<double>::infinity());

// Two-step path-count block matrix over the integers:
//   [ H^T H   H^T ]
//   [ H       H H^T ]
// shape (2n-k) x (2n-k); gradients flow through the real products.
ad::Tensor build_mask(const ad::Tensor& h_view);

// Projects omega entries into the open interval (-bound, bound).
void clamp(OmegaParam& p);

// Current realized parity bits (forward values only).
BinaryMatrix realized_parity(const OmegaParam& p);
std::size_t parity_diff_bits(const BinaryMatrix& a, const BinaryMatrix& b);

}  // namespace ecc

#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ecc/gf2.hpp"

namespace ecc::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// One node of a define-by-run reverse-mode graph over dense real tensors.
// Graphs are rebuilt every step; backward() visits nodes once in reverse
// topological order and accumulates vector-Jacobian products into parents.
struct Node {
  Shape shape;
  std::vector<double> val;
  std::vector<double> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, writes parents' grads

  std::size_t numel() const { return val.size(); }
  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor constant(Shape shape, std::vector<double> values);
  static Tensor scalar(double v);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor param(Shape shape, std::vector<double> values);  // requires_grad leaf

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->numel(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<double>& values() const { return node_->val; }
  std::vector<double>& mutable_values() { return node_->val; }
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { node_->zero_grad(); }
  double value() const;  // scalar tensors only

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// ---- primitive ops (shape errors throw std::invalid_argument) ----

// Elementwise sum; b may also be a trailing-suffix shape of a (broadcast
// over the leading axes), e.g. (B,T,d)+(d) or (B,T,T)+(T,T).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);          // same shape
Tensor affine(const Tensor& a, double scale, double shift);
inline Tensor scale(const Tensor& a, double s) { return affine(a, s, 0.0); }

// 2D x 2D, batched 3D x 2D (flattened), 2D x 3D and 3D x 3D (per batch).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);        // rank 2
Tensor transpose_last2(const Tensor& a);  // rank 3

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);
Tensor reshape(const Tensor& a, Shape shape);

Tensor abs(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softmax_last(const Tensor& a);  // softmax over the last axis; -inf entries allowed
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// out[..., j] = a[...] * w[j]; w is rank 1.
Tensor broadcast_outer(const Tensor& a, const Tensor& w);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor bce_with_logits_mean(const Tensor& logits, const Tensor& targets);

// Straight-through binarization: forward u > 0 -> 0, u <= 0 -> 1 except
// bin(0) = 0 (sign(0) := +1); backward -(1/2) * 1_{|u| <= tau} * g.
Tensor ste_binarize(const Tensor& u, double tau = std::numeric_limits<double>::infinity());

// Polarized GF(2) product: out[b,i] = (1 - prod_j (1 - 2 x[b,j] w[j,i])) / 2.
// On binary inputs this equals the GF(2) matrix product exactly; gradients
// flow through the real multilinear form to both operands.
// x: (B,K) or (K); w: (K,N).
Tensor gf2_polar_matmul(const Tensor& x, const Tensor& w);

// Ablation variant: forward is the integer product reduced mod 2; backward
// passes gradients gated by 1_{|pre| <= 1} on the pre-modulo value.
Tensor modulo_ste_matmul(const Tensor& x, const Tensor& w);

Tensor stop_gradient(const Tensor& a);

Tensor tensor_from(const BinaryMatrix& m, bool requires_grad = false);
Tensor tensor_from(const BitVec& v, bool requires_grad = false);

// Populates grads of every requires_grad node reachable from `loss`.
// Repeated subexpressions accumulate additively. Loss must be scalar.
void backward(const Tensor& loss);

// Central-difference check of d(loss)/d(leaf) for every coordinate of every
// leaf. `rebuild` must reconstruct the loss from the leaves' current values.
// Returns max over coordinates of |analytic - numeric| /
// max(|analytic|, |numeric|, 1e-12).
double finite_diff_check(const std::function<Tensor()>& rebuild, std::span<const Tensor> leaves,
                         double eps = 1e-5);

}  // namespace ecc::ad

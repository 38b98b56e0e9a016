#include "ecc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "ecc/parallel.hpp"

namespace ecc::ad {

namespace {

constexpr std::size_t kParallelFlops = 1 << 16;

[[noreturn]] void shape_error(const std::string& op, const std::string& detail) {
  throw std::invalid_argument(op + ": " + detail);
}

std::shared_ptr<Node> new_node(Shape shape, std::vector<std::shared_ptr<Node>> parents = {}) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->val.resize(shape_numel(n->shape));
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

// ---- dense kernels (row major) ----

void gemm(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate) {
  parallel_for(
      m, std::max<std::size_t>(1, kParallelFlops / std::max<std::size_t>(1, k * n)),
      [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
          double* crow = c + i * n;
          if (!accumulate) std::fill(crow, crow + n, 0.0);
          const double* arow = a + i * k;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
          }
        }
      });
}

// c (k x n) += a(m x k)^T * g (m x n)
void gemm_at_b(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  parallel_for(k, std::max<std::size_t>(1, kParallelFlops / std::max<std::size_t>(1, m * n)),
               [&](std::size_t lo, std::size_t hi) {
                 for (std::size_t kk = lo; kk < hi; ++kk) {
                   double* crow = c + kk * n;
                   for (std::size_t i = 0; i < m; ++i) {
                     const double av = a[i * k + kk];
                     if (av == 0.0) continue;
                     const double* grow = g + i * n;
                     for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
                   }
                 }
               });
}

// c (m x k) += g (m x n) * b(k x n)^T
void gemm_a_bt(const double* g, const double* b, double* c, std::size_t m, std::size_t k,
               std::size_t n) {
  parallel_for(m, std::max<std::size_t>(1, kParallelFlops / std::max<std::size_t>(1, k * n)),
               [&](std::size_t lo, std::size_t hi) {
                 for (std::size_t i = lo; i < hi; ++i) {
                   double* crow = c + i * k;
                   const double* grow = g + i * n;
                   for (std::size_t kk = 0; kk < k; ++kk) {
                     const double* brow = b + kk * n;
                     double acc = 0.0;
                     for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                     crow[kk] += acc;
                   }
                 }
               });
}

struct ElemwiseSpec {
  double (*f)(double);
  double (*df)(double, double);  // (x, y) -> dy/dx
};

Tensor elementwise(const Tensor& a, ElemwiseSpec spec) {
  auto n = new_node(a.shape(), {a.node()});
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = spec.f(av[i]);
  n->backprop = [spec](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.val.size(); ++i)
      p.grad[i] += self.grad[i] * spec.df(p.val[i], self.val[i]);
  };
  return Tensor(n);
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  for (std::size_t i = 0; i < small.size(); ++i)
    if (small[small.size() - 1 - i] != big[big.size() - 1 - i]) return false;
  return true;
}

}  // namespace

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (const auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) shape_error("constant", "value count mismatch");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->val = std::move(values);
  return Tensor(n);
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->val.assign(shape_numel(shape), 0.0);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node()->requires_grad = true;
  return t;
}

double Tensor::value() const {
  if (numel() != 1) throw std::invalid_argument("Tensor::value: tensor is not scalar");
  return node_->val[0];
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool same = a.shape() == b.shape();
  if (!same && !is_suffix(b.shape(), a.shape()))
    shape_error("add",
                "incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  auto n = new_node(a.shape(), {a.node(), b.node()});
  const auto& av = a.values();
  const auto& bv = b.values();
  const std::size_t bn = bv.size();
  for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = av[i] + bv[i % bn];
  n->backprop = [bn](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i % bn] += self.grad[i];
    }
  };
  return Tensor(n);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    shape_error("mul", "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  auto n = new_node(a.shape(), {a.node(), b.node()});
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = av[i] * bv[i];
  n->backprop = [](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa.grad[i] += self.grad[i] * pb.val[i];
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb.grad[i] += self.grad[i] * pa.val[i];
    }
  };
  return Tensor(n);
}

Tensor affine(const Tensor& a, double scale_v, double shift_v) {
  auto n = new_node(a.shape(), {a.node()});
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) n->val[i] = scale_v * av[i] + shift_v;
  n->backprop = [scale_v](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += scale_v * self.grad[i];
  };
  return Tensor(n);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sa.size() < 2 || sa.size() > 3 || sb.size() < 2 || sb.size() > 3)
    shape_error("matmul", "rank must be 2 or 3");

  const std::size_t m = sa[sa.size() - 2];
  const std::size_t k = sa[sa.size() - 1];
  const std::size_t kb = sb[sb.size() - 2];
  const std::size_t nn = sb[sb.size() - 1];
  if (k != kb) shape_error("matmul", "inner dims differ: " + shape_str(sa) + " x " + shape_str(sb));
  const std::size_t ba = sa.size() == 3 ? sa[0] : 1;
  const std::size_t bb = sb.size() == 3 ? sb[0] : 1;
  if (ba != 1 && bb != 1 && ba != bb) shape_error("matmul", "batch dims differ");
  const std::size_t batch = std::max(ba, bb);

  Shape out_shape = (sa.size() == 3 || sb.size() == 3) ? Shape{batch, m, nn} : Shape{m, nn};
  auto node = new_node(std::move(out_shape), {a.node(), b.node()});

  const double* ap = a.values().data();
  const double* bp = b.values().data();
  double* cp = node->val.data();

  if (sb.size() == 2) {
    gemm(ap, bp, cp, ba * m, k, nn, false);  // covers plain 2D and (B,M,K)x(K,N)
  } else {
    for (std::size_t bi = 0; bi < batch; ++bi)
      gemm(ap + (ba == 1 ? 0 : bi * m * k), bp + (bb == 1 ? 0 : bi * k * nn), cp + bi * m * nn, m,
           k, nn, false);
  }

  node->backprop = [m, k, nn, ba, bb, batch, rank_b = sb.size()](Node& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const double* g = self.grad.data();
    if (rank_b == 2) {
      if (pa.requires_grad) {
        pa.ensure_grad();
        gemm_a_bt(g, pb.val.data(), pa.grad.data(), ba * m, k, nn);
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        gemm_at_b(pa.val.data(), g, pb.grad.data(), ba * m, k, nn);
      }
      return;
    }
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t bi = 0; bi < batch; ++bi)
        gemm_a_bt(g + bi * m * nn, pb.val.data() + (bb == 1 ? 0 : bi * k * nn),
                  pa.grad.data() + (ba == 1 ? 0 : bi * m * k), m, k, nn);
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (std::size_t bi = 0; bi < batch; ++bi)
        gemm_at_b(pa.val.data() + (ba == 1 ? 0 : bi * m * k), g + bi * m * nn,
                  pb.grad.data() + (bb == 1 ? 0 : bi * k * nn), m, k, nn);
    }
  };
  return Tensor(node);
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) shape_error("transpose", "rank 2 required");
  const std::size_t r = a.shape()[0];
  const std::size_t c = a.shape()[1];
  auto n = new_node({c, r}, {a.node()});
  const auto& av = a.values();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) n->val[j * r + i] = av[i * c + j];
  n->backprop = [r, c](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j * r + i];
  };
  return Tensor(n);
}

Tensor transpose_last2(const Tensor& a) {
  if (a.rank() != 3) shape_error("transpose_last2", "rank 3 required");
  const std::size_t b = a.shape()[0];
  const std::size_t r = a.shape()[1];
  const std::size_t c = a.shape()[2];
  auto n = new_node({b, c, r}, {a.node()});
  const auto& av = a.values();
  for (std::size_t bi = 0; bi < b; ++bi)
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        n->val[bi * r * c + j * r + i] = av[bi * r * c + i * c + j];
  n->backprop = [b, r, c](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t bi = 0; bi < b; ++bi)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          p.grad[bi * r * c + i * c + j] += self.grad[bi * r * c + j * r + i];
  };
  return Tensor(n);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) shape_error("concat", "no parts");
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) shape_error("concat", "axis out of range");
  Shape out = s0;
  std::size_t axis_total = 0;
  for (const Tensor& p : parts) {
    const Shape& sp = p.shape();
    if (sp.size() != s0.size()) shape_error("concat", "rank mismatch");
    for (std::size_t d = 0; d < sp.size(); ++d)
      if (d != axis && sp[d] != s0[d]) shape_error("concat", "off-axis dims mismatch");
    axis_total += sp[axis];
  }
  out[axis] = axis_total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s0[d];
  for (std::size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];

  std::vector<std::shared_ptr<Node>> parent_nodes;
  for (const Tensor& p : parts) parent_nodes.push_back(p.node());
  auto n = new_node(out, std::move(parent_nodes));

  const std::size_t out_stride = axis_total * inner;
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t blk = p.shape()[axis] * inner;
    const auto& pv = p.values();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy(pv.begin() + o * blk, pv.begin() + (o + 1) * blk,
                n->val.begin() + o * out_stride + offset);
    offset += blk;
  }

  n->backprop = [outer, out_stride](Node& self) {
    std::size_t offset = 0;
    for (const auto& pp : self.parents) {
      Node& p = *pp;
      const std::size_t blk = p.val.size() / std::max<std::size_t>(1, outer);
      if (p.requires_grad) {
        p.ensure_grad();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < blk; ++i)
            p.grad[o * blk + i] += self.grad[o * out_stride + offset + i];
      }
      offset += blk;
    }
  };
  return Tensor(n);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len) {
  const Shape& s = a.shape();
  if (axis >= s.size()) shape_error("slice", "axis out of range");
  if (start + len > s[axis]) shape_error("slice", "range exceeds axis extent");
  Shape out = s;
  out[axis] = len;

  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];

  auto n = new_node(out, {a.node()});
  const std::size_t in_stride = s[axis] * inner;
  const std::size_t out_blk = len * inner;
  const auto& av = a.values();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy(av.begin() + o * in_stride + start * inner,
              av.begin() + o * in_stride + start * inner + out_blk, n->val.begin() + o * out_blk);

  n->backprop = [outer, inner, in_stride, out_blk, start](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < out_blk; ++i)
        p.grad[o * in_stride + start * inner + i] += self.grad[o * out_blk + i];
  };
  return Tensor(n);
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) shape_error("reshape", "element count mismatch");
  auto n = new_node(std::move(shape), {a.node()});
  n->val = a.values();
  n->backprop = [](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  };
  return Tensor(n);
}

Tensor abs(const Tensor& a) {
  return elementwise(a, {[](double x) { return std::fabs(x); },
                         [](double x, double) { return x >= 0.0 ? 1.0 : -1.0; }});
}

Tensor relu(const Tensor& a) {
  return elementwise(a, {[](double x) { return x > 0.0 ? x : 0.0; },
                         [](double x, double) { return x > 0.0 ? 1.0 : 0.0; }});
}

Tensor gelu(const Tensor& a) {
  return elementwise(
      a, {[](double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); },
          [](double x, double) {
            return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) +
                   x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
          }});
}

Tensor sigmoid(const Tensor& a) {
  return elementwise(a, {[](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                         [](double, double y) { return y * (1.0 - y); }});
}

Tensor softmax_last(const Tensor& a) {
  const Shape& s = a.shape();
  if (s.empty()) shape_error("softmax_last", "rank >= 1 required");
  const std::size_t l = s.back();
  const std::size_t rows = a.numel() / l;
  auto n = new_node(s, {a.node()});
  const double* av = a.values().data();
  double* ov = n->val.data();
  parallel_for(rows, std::max<std::size_t>(1, kParallelFlops / std::max<std::size_t>(1, 4 * l)),
               [&](std::size_t lo, std::size_t hi) {
                 for (std::size_t r = lo; r < hi; ++r) {
                   const double* x = av + r * l;
                   double* y = ov + r * l;
                   double mx = -std::numeric_limits<double>::infinity();
                   for (std::size_t j = 0; j < l; ++j) mx = std::max(mx, x[j]);
                   double sum = 0.0;
                   for (std::size_t j = 0; j < l; ++j) {
                     y[j] = std::exp(x[j] - mx);
                     sum += y[j];
                   }
                   const double inv = 1.0 / sum;
                   for (std::size_t j = 0; j < l; ++j) y[j] *= inv;
                 }
               });
  n->backprop = [l, rows](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const double* y = self.val.data();
    const double* g = self.grad.data();
    double* gx = p.grad.data();
    parallel_for(rows, std::max<std::size_t>(1, kParallelFlops / std::max<std::size_t>(1, 4 * l)),
                 [&](std::size_t lo, std::size_t hi) {
                   for (std::size_t r = lo; r < hi; ++r) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < l; ++j) dot += g[r * l + j] * y[r * l + j];
                     for (std::size_t j = 0; j < l; ++j)
                       gx[r * l + j] += y[r * l + j] * (g[r * l + j] - dot);
                   }
                 });
  };
  return Tensor(n);
}

Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias, double eps) {
  const Shape& s = a.shape();
  if (s.empty()) shape_error("layer_norm", "rank >= 1 required");
  const std::size_t d = s.back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
    shape_error("layer_norm", "gain/bias must have shape (last_dim)");
  const std::size_t rows = a.numel() / d;

  auto n = new_node(s, {a.node(), gain.node(), bias.node()});
  const double* x = a.values().data();
  const double* gm = gain.values().data();
  const double* bt = bias.values().data();
  double* y = n->val.data();
  parallel_for(rows, std::max<std::size_t>(1, kParallelFlops / std::max<std::size_t>(1, 6 * d)),
               [&](std::size_t lo, std::size_t hi) {
                 for (std::size_t r = lo; r < hi; ++r) {
                   const double* xr = x + r * d;
                   double mu = 0.0;
                   for (std::size_t j = 0; j < d; ++j) mu += xr[j];
                   mu /= static_cast<double>(d);
                   double var = 0.0;
                   for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
                   var /= static_cast<double>(d);
                   const double istd = 1.0 / std::sqrt(var + eps);
                   double* yr = y + r * d;
                   for (std::size_t j = 0; j < d; ++j) yr[j] = (xr[j] - mu) * istd * gm[j] + bt[j];
                 }
               });

  n->backprop = [d, rows, eps](Node& self) {
    auto& px = *self.parents[0];
    auto& pg = *self.parents[1];
    auto& pb = *self.parents[2];
    const double* x = px.val.data();
    const double* gm = pg.val.data();
    const double* g = self.grad.data();
    const double dn = static_cast<double>(d);

    if (px.requires_grad) {
      px.ensure_grad();
      double* gx = px.grad.data();
      parallel_for(
          rows, std::max<std::size_t>(1, kParallelFlops / std::max<std::size_t>(1, 10 * d)),
          [&](std::size_t lo, std::size_t hi) {
            std::vector<double> xhat(d);
            for (std::size_t r = lo; r < hi; ++r) {
              const double* xr = x + r * d;
              double mu = 0.0;
              for (std::size_t j = 0; j < d; ++j) mu += xr[j];
              mu /= dn;
              double var = 0.0;
              for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
              var /= dn;
              const double istd = 1.0 / std::sqrt(var + eps);
              double m1 = 0.0, m2 = 0.0;
              for (std::size_t j = 0; j < d; ++j) {
                xhat[j] = (xr[j] - mu) * istd;
                const double gh = g[r * d + j] * gm[j];
                m1 += gh;
                m2 += gh * xhat[j];
              }
              m1 /= dn;
              m2 /= dn;
              for (std::size_t j = 0; j < d; ++j) {
                const double gh = g[r * d + j] * gm[j];
                gx[r * d + j] += istd * (gh - m1 - xhat[j] * m2);
              }
            }
          });
    }
    if (pg.requires_grad || pb.requires_grad) {
      if (pg.requires_grad) pg.ensure_grad();
      if (pb.requires_grad) pb.ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= dn;
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= dn;
        const double istd = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
          if (pg.requires_grad) pg.grad[j] += g[r * d + j] * (xr[j] - mu) * istd;
          if (pb.requires_grad) pb.grad[j] += g[r * d + j];
        }
      }
    }
  };
  return Tensor(n);
}

Tensor broadcast_outer(const Tensor& a, const Tensor& w) {
  if (w.rank() != 1) shape_error("broadcast_outer", "w must be rank 1");
  const std::size_t d = w.shape()[0];
  Shape out = a.shape();
  out.push_back(d);
  auto n = new_node(std::move(out), {a.node(), w.node()});
  const auto& av = a.values();
  const auto& wv = w.values();
  for (std::size_t i = 0; i < av.size(); ++i)
    for (std::size_t j = 0; j < d; ++j) n->val[i * d + j] = av[i] * wv[j];
  n->backprop = [d](Node& self) {
    auto& pa = *self.parents[0];
    auto& pw = *self.parents[1];
    if (pa.requires_grad) {
      pa.ensure_grad();
      for (std::size_t i = 0; i < pa.val.size(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < d; ++j) acc += self.grad[i * d + j] * pw.val[j];
        pa.grad[i] += acc;
      }
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      for (std::size_t i = 0; i < pa.val.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) pw.grad[j] += self.grad[i * d + j] * pa.val[i];
    }
  };
  return Tensor(n);
}

Tensor sum_all(const Tensor& a) {
  auto n = new_node({1}, {a.node()});
  double acc = 0.0;
  for (const double v : a.values()) acc += v;
  n->val[0] = acc;
  n->backprop = [](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (auto& g : p.grad) g += self.grad[0];
  };
  return Tensor(n);
}

Tensor mean_all(const Tensor& a) {
  return affine(sum_all(a), 1.0 / static_cast<double>(a.numel()), 0.0);
}

Tensor bce_with_logits_mean(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) shape_error("bce_with_logits_mean", "shape mismatch");
  auto n = new_node({1}, {logits.node(), targets.node()});
  const auto& z = logits.values();
  const auto& t = targets.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    acc += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::fabs(z[i])));
  const double inv_n = 1.0 / static_cast<double>(z.size());
  n->val[0] = acc * inv_n;
  n->backprop = [inv_n](Node& self) {
    auto& pz = *self.parents[0];
    auto& pt = *self.parents[1];
    const double g = self.grad[0] * inv_n;
    if (pz.requires_grad) {
      pz.ensure_grad();
      for (std::size_t i = 0; i < pz.val.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-pz.val[i]));
        pz.grad[i] += g * (s - pt.val[i]);
      }
    }
    if (pt.requires_grad) {
      pt.ensure_grad();
      for (std::size_t i = 0; i < pt.val.size(); ++i) pt.grad[i] += -g * pz.val[i];
    }
  };
  return Tensor(n);
}

Tensor ste_binarize(const Tensor& u, double tau) {
  auto n = new_node(u.shape(), {u.node()});
  const auto& uv = u.values();
  for (std::size_t i = 0; i < uv.size(); ++i) n->val[i] = uv[i] < 0.0 ? 1.0 : 0.0;
  n->backprop = [tau](Node& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      if (std::fabs(p.val[i]) <= tau) p.grad[i] += -0.5 * self.grad[i];
  };
  return Tensor(n);
}

namespace {

void polar_shapes(const Tensor& x, const Tensor& w, std::size_t& batch, std::size_t& k,
                  std::size_t& n_out, const char* op) {
  if (w.rank() != 2) shape_error(op, "w must be rank 2");
  k = w.shape()[0];
  n_out = w.shape()[1];
  if (x.rank() == 1) {
    batch = 1;
    if (x.shape()[0] != k) shape_error(op, "x length mismatch");
  } else if (x.rank() == 2) {
    batch = x.shape()[0];
    if (x.shape()[1] != k) shape_error(op, "x inner dim mismatch");
  } else {
    shape_error(op, "x must be rank 1 or 2");
  }
}

}  // namespace

Tensor gf2_polar_matmul(const Tensor& x, const Tensor& w) {
  std::size_t batch, k, n_out;
  polar_shapes(x, w, batch, k, n_out, "gf2_polar_matmul");
  Shape out_shape = x.rank() == 1 ? Shape{n_out} : Shape{batch, n_out};
  auto node = new_node(std::move(out_shape), {x.node(), w.node()});

  {
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    double* ov = node->val.data();
    parallel_for(batch,
                 std::max<std::size_t>(1, kParallelFlops / std::max<std::size_t>(1, 2 * k * n_out)),
                 [&](std::size_t lo, std::size_t hi) {
                   for (std::size_t b = lo; b < hi; ++b)
                     for (std::size_t i = 0; i < n_out; ++i) {
                       double prod = 1.0;
                       for (std::size_t j = 0; j < k; ++j)
                         prod *= 1.0 - 2.0 * xv[b * k + j] * wv[j * n_out + i];
                       ov[b * n_out + i] = 0.5 * (1.0 - prod);
                     }
                 });
  }

  node->backprop = [batch, k, n_out](Node& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    if (!px.requires_grad && !pw.requires_grad) return;
    if (px.requires_grad) px.ensure_grad();
    if (pw.requires_grad) pw.ensure_grad();
    const double* xv = px.val.data();
    const double* wv = pw.val.data();
    std::vector<double> pf(k), sf(k);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t i = 0; i < n_out; ++i) {
        const double g = self.grad[b * n_out + i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) {
          const double f = 1.0 - 2.0 * xv[b * k + j] * wv[j * n_out + i];
          pf[j] = j == 0 ? f : pf[j - 1] * f;
        }
        for (std::size_t j = k; j-- > 0;) {
          const double f = 1.0 - 2.0 * xv[b * k + j] * wv[j * n_out + i];
          sf[j] = j + 1 == k ? f : sf[j + 1] * f;
        }
        for (std::size_t j = 0; j < k; ++j) {
          double others = 1.0;
          if (j > 0) others *= pf[j - 1];
          if (j + 1 < k) others *= sf[j + 1];
          // out = (1 - f_j * others)/2, f_j = 1 - 2 x w
          const double go = g * others;
          if (px.requires_grad) px.grad[b * k + j] += go * wv[j * n_out + i];
          if (pw.requires_grad) pw.grad[j * n_out + i] += go * xv[b * k + j];
        }
      }
    }
  };
  return Tensor(node);
}

Tensor modulo_ste_matmul(const Tensor& x, const Tensor& w) {
  std::size_t batch, k, n_out;
  polar_shapes(x, w, batch, k, n_out, "modulo_ste_matmul");
  Shape out_shape = x.rank() == 1 ? Shape{n_out} : Shape{batch, n_out};
  auto node = new_node(std::move(out_shape), {x.node(), w.node()});

  // Pre-modulo values are kept for the gradient gate.
  auto pre = std::make_shared<std::vector<double>>(batch * n_out, 0.0);
  {
    const double* xv = x.values().data();
    const double* wv = w.values().data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n_out; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) acc += xv[b * k + j] * wv[j * n_out + i];
        (*pre)[b * n_out + i] = acc;
        double r = std::fmod(acc, 2.0);
        if (r < 0.0) r += 2.0;
        node->val[b * n_out + i] = r;
      }
  }

  node->backprop = [batch, k, n_out, pre](Node& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    if (!px.requires_grad && !pw.requires_grad) return;
    if (px.requires_grad) px.ensure_grad();
    if (pw.requires_grad) pw.ensure_grad();
    const double* xv = px.val.data();
    const double* wv = pw.val.data();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n_out; ++i) {
        if (std::fabs((*pre)[b * n_out + i]) > 1.0) continue;
        const double g = self.grad[b * n_out + i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) {
          if (px.requires_grad) px.grad[b * k + j] += g * wv[j * n_out + i];
          if (pw.requires_grad) pw.grad[j * n_out + i] += g * xv[b * k + j];
        }
      }
  };
  return Tensor(node);
}

Tensor stop_gradient(const Tensor& a) {
  auto n = std::make_shared<Node>();
  n->shape = a.shape();
  n->val = a.values();
  return Tensor(n);
}

Tensor tensor_from(const BinaryMatrix& m, bool requires_grad) {
  std::vector<double> v(m.rows() * m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c)
      v[r * m.cols() + c] = static_cast<double>(m.get(r, c));
  Tensor t = Tensor::constant({m.rows(), m.cols()}, std::move(v));
  t.node()->requires_grad = requires_grad;
  return t;
}

Tensor tensor_from(const BitVec& bits, bool requires_grad) {
  std::vector<double> v(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) v[i] = static_cast<double>(bits[i]);
  Tensor t = Tensor::constant({bits.size()}, std::move(v));
  t.node()->requires_grad = requires_grad;
  return t;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined tensor");
  if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Iterative post-order DFS; reversed post-order is a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* next = node->parents[idx++].get();
      if (next->requires_grad && !visited.count(next)) {
        visited.insert(next);
        stack.emplace_back(next, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root->ensure_grad();
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backprop && !node->grad.empty()) node->backprop(*node);
  }
}

double finite_diff_check(const std::function<Tensor()>& rebuild, std::span<const Tensor> leaves,
                         double eps) {
  for (const Tensor& leaf : leaves) const_cast<Tensor&>(leaf).zero_grad();
  Tensor loss = rebuild();
  backward(loss);

  std::vector<std::vector<double>> analytic;
  for (const Tensor& leaf : leaves) {
    if (leaf.grad().empty())
      analytic.emplace_back(leaf.numel(), 0.0);
    else
      analytic.push_back(leaf.grad());
  }

  double max_rel = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& vals = const_cast<Tensor&>(leaves[li]).mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double saved = vals[i];
      vals[i] = saved + eps;
      const double fp = rebuild().value();
      vals[i] = saved - eps;
      const double fm = rebuild().value();
      vals[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic[li][i];
      const double rel =
          std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-12});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace ecc::ad

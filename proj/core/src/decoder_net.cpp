#include "ecc/decoder_net.hpp"

#include <cmath>
#include <stdexcept>

#include "ecc/rng.hpp"

namespace ecc {

namespace ad2 = ecc::ad;
using ad2::Tensor;

MaskMode mask_mode_from_string(const std::string& s) {
  if (s == "code_mask") return MaskMode::code_mask;
  if (s == "trainable_mask_v2") return MaskMode::trainable_mask_v2;
  if (s == "code_mask_stop_gradient") return MaskMode::code_mask_stop_gradient;
  throw std::invalid_argument("unknown mask mode: " + s);
}

std::string to_string(MaskMode m) {
  switch (m) {
    case MaskMode::code_mask: return "code_mask";
    case MaskMode::trainable_mask_v2: return "trainable_mask_v2";
    case MaskMode::code_mask_stop_gradient: return "code_mask_stop_gradient";
  }
  return "?";
}

namespace {

Tensor gauss_param(ad2::Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(ad2::shape_numel(shape));
  for (double& x : v) x = stddev * rng.gaussian();
  return Tensor::param(std::move(shape), std::move(v));
}

Tensor const_param(ad2::Shape shape, double value) {
  return Tensor::param(shape, std::vector<double>(ad2::shape_numel(shape), value));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return ad2::add(ad2::matmul(x, w), b);
}

// Additive (T x T) tensor with -inf on the diagonal; excludes each token's
// self-contribution from attention.
Tensor diagonal_neg_inf(std::size_t t) {
  std::vector<double> v(t * t, 0.0);
  for (std::size_t i = 0; i < t; ++i) v[i * t + i] = -std::numeric_limits<double>::infinity();
  return Tensor::constant({t, t}, std::move(v));
}

}  // namespace

DecoderModel DecoderModel::init(const DecoderConfig& cfg, std::uint64_t seed) {
  if (cfg.dim % cfg.heads != 0)
    throw std::invalid_argument("DecoderModel: dim must be divisible by heads");
  if (cfg.n <= cfg.k || cfg.k == 0) throw std::invalid_argument("DecoderModel: bad (n,k)");

  Rng rng = Rng::split(seed, 0xDEC0DE);
  const std::size_t d = cfg.dim;
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const double sd4 = 1.0 / std::sqrt(static_cast<double>(4 * d));

  DecoderModel m;
  m.cfg = cfg;
  m.w_mag = gauss_param({d}, 1.0, rng);
  m.w_syn0 = gauss_param({d}, 1.0, rng);
  m.w_syn1 = gauss_param({d}, 1.0, rng);

  for (std::size_t l = 0; l < cfg.layers; ++l) {
    Layer layer;
    layer.ln1_g = const_param({d}, 1.0);
    layer.ln1_b = const_param({d}, 0.0);
    layer.wq = gauss_param({d, d}, sd, rng);
    layer.bq = const_param({d}, 0.0);
    layer.wk = gauss_param({d, d}, sd, rng);
    layer.bk = const_param({d}, 0.0);
    layer.wv = gauss_param({d, d}, sd, rng);
    layer.bv = const_param({d}, 0.0);
    layer.wo = gauss_param({d, d}, sd, rng);
    layer.bo = const_param({d}, 0.0);
    layer.ln2_g = const_param({d}, 1.0);
    layer.ln2_b = const_param({d}, 0.0);
    layer.ff_w1 = gauss_param({d, 4 * d}, sd, rng);
    layer.ff_b1 = const_param({4 * d}, 0.0);
    layer.ff_w2 = gauss_param({d, 4 * d}, sd, rng);
    layer.ff_b2 = const_param({4 * d}, 0.0);
    layer.ff_w3 = gauss_param({4 * d, d}, sd4, rng);
    layer.ff_b3 = const_param({d}, 0.0);
    m.layers.push_back(std::move(layer));
  }
  m.lnf_g = const_param({d}, 1.0);
  m.lnf_b = const_param({d}, 0.0);

  m.psi_w1 = gauss_param({1, 50}, 1.0, rng);
  m.psi_b1 = const_param({50}, 0.0);
  m.psi_w2 = gauss_param({50, 1}, 0.2 / std::sqrt(50.0), rng);
  m.psi_b2 = const_param({1}, 0.0);
  if (cfg.mask_mode == MaskMode::trainable_mask_v2)
    m.mask_v2 = const_param({cfg.tokens(), cfg.tokens()}, 0.0);

  m.w_m = gauss_param({d, d}, sd, rng);
  m.w_s = gauss_param({d, d}, sd, rng);
  m.w_out = gauss_param({d, 1}, sd, rng);
  return m;
}

std::vector<Tensor> DecoderModel::theta_parameters() const {
  std::vector<Tensor> ps{w_mag, w_syn0, w_syn1};
  for (const Layer& l : layers) {
    for (const Tensor& t : {l.ln1_g, l.ln1_b, l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo, l.bo,
                            l.ln2_g, l.ln2_b, l.ff_w1, l.ff_b1, l.ff_w2, l.ff_b2, l.ff_w3, l.ff_b3})
      ps.push_back(t);
  }
  ps.push_back(lnf_g);
  ps.push_back(lnf_b);
  ps.push_back(w_m);
  ps.push_back(w_s);
  ps.push_back(w_out);
  return ps;
}

std::vector<Tensor> DecoderModel::gamma_parameters() const {
  if (cfg.mask_mode == MaskMode::trainable_mask_v2) return {mask_v2};
  return {psi_w1, psi_b1, psi_w2, psi_b2};
}

std::vector<Tensor> DecoderModel::parameters() const {
  std::vector<Tensor> ps = theta_parameters();
  for (const Tensor& t : gamma_parameters()) ps.push_back(t);
  return ps;
}

std::size_t DecoderModel::parameter_count() const {
  std::size_t total = 0;
  for (const Tensor& t : parameters()) total += t.numel();
  return total;
}

Tensor initial_embed(const DecoderModel& m, const Tensor& mag, const Tensor& syn) {
  const Tensor phi_m = ad2::broadcast_outer(mag, m.w_mag);
  // (1-s) w0 + s w1 written as w0 + s (w1 - w0); exact one-hot on binary s.
  const Tensor delta = ad2::add(m.w_syn1, ad2::scale(m.w_syn0, -1.0));
  const Tensor phi_s = ad2::add(ad2::broadcast_outer(syn, delta), m.w_syn0);
  const Tensor parts[] = {phi_m, phi_s};
  return ad2::concat(parts, 1);
}

Tensor psi_map(const DecoderModel& m, const Tensor& counts) {
  const ad2::Shape original = counts.shape();
  const Tensor flat = ad2::reshape(counts, {counts.numel(), 1});
  const Tensor hidden = ad2::relu(linear(flat, m.psi_w1, m.psi_b1));
  const Tensor out = linear(hidden, m.psi_w2, m.psi_b2);
  return ad2::reshape(out, original);
}

Tensor masked_attention(const DecoderModel::Layer& layer, const DecoderConfig& cfg,
                        const Tensor& x, const Tensor& add_mask) {
  const std::size_t dh = cfg.head_dim();
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor q = linear(x, layer.wq, layer.bq);
  const Tensor k = linear(x, layer.wk, layer.bk);
  const Tensor v = linear(x, layer.wv, layer.bv);

  std::vector<Tensor> head_outs;
  head_outs.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const Tensor qh = ad2::slice(q, 2, h * dh, dh);
    const Tensor kh = ad2::slice(k, 2, h * dh, dh);
    const Tensor vh = ad2::slice(v, 2, h * dh, dh);
    Tensor scores = ad2::matmul(qh, ad2::transpose_last2(kh));
    scores = ad2::scale(ad2::add(scores, add_mask), inv_sqrt_dh);
    scores = ad2::add(scores, diagonal_neg_inf(cfg.tokens()));
    const Tensor att = ad2::softmax_last(scores);
    head_outs.push_back(ad2::matmul(att, vh));
  }
  const Tensor merged = ad2::concat(std::span<const Tensor>(head_outs.data(), head_outs.size()), 2);
  return linear(merged, layer.wo, layer.bo);
}

Tensor decoder_forward(const DecoderModel& m, const Tensor& y, const CodeViews& code,
                       const ForwardHooks& hooks) {
  if (y.rank() != 2 || y.shape()[1] != m.cfg.n)
    throw std::invalid_argument("decoder_forward: y must be (B, n)");
  if (code.n != m.cfg.n || code.k != m.cfg.k)
    throw std::invalid_argument("decoder_forward: code dims do not match the model");
  const std::size_t n = m.cfg.n;
  const std::size_t k = m.cfg.k;

  // Syndrome through the differentiable H; the binarization of y is a
  // straight-through estimate so the code gradient survives, y itself is
  // input data.
  const Tensor h_syn = hooks.grad_through_syndrome ? code.H : ad2::stop_gradient(code.H);
  const Tensor ybin = ad2::ste_binarize(y);
  const Tensor syn = ad2::gf2_polar_matmul(ybin, ad2::transpose(h_syn));
  const Tensor mag = ad2::abs(y);

  Tensor x = initial_embed(m, mag, syn);

  Tensor mask_add;
  if (hooks.fixed_mask != nullptr) {
    mask_add = *hooks.fixed_mask;
  } else if (m.cfg.mask_mode == MaskMode::trainable_mask_v2) {
    mask_add = m.mask_v2;
  } else {
    const bool cut = !hooks.grad_through_mask || m.cfg.mask_mode == MaskMode::code_mask_stop_gradient;
    const Tensor h_mask = cut ? ad2::stop_gradient(code.H) : code.H;
    mask_add = psi_map(m, build_mask(h_mask));
  }

  for (const DecoderModel::Layer& layer : m.layers) {
    const Tensor attn = masked_attention(layer, m.cfg, ad2::layer_norm(x, layer.ln1_g, layer.ln1_b),
                                         mask_add);
    x = ad2::add(x, attn);
    const Tensor pre = ad2::layer_norm(x, layer.ln2_g, layer.ln2_b);
    const Tensor gate = ad2::gelu(linear(pre, layer.ff_w1, layer.ff_b1));
    const Tensor value = linear(pre, layer.ff_w2, layer.ff_b2);
    const Tensor ff = linear(ad2::mul(gate, value), layer.ff_w3, layer.ff_b3);
    x = ad2::add(x, ff);
  }
  x = ad2::layer_norm(x, m.lnf_g, m.lnf_b);

  const Tensor phi_mag = ad2::slice(x, 1, 0, n);
  const Tensor phi_syn = ad2::slice(x, 1, n, n - k);
  const Tensor h_head = hooks.grad_through_output_head ? code.H : ad2::stop_gradient(code.H);
  const Tensor mixed = ad2::add(ad2::matmul(phi_mag, m.w_m),
                                ad2::matmul(ad2::transpose(h_head), ad2::matmul(phi_syn, m.w_s)));
  const Tensor logits3 = ad2::matmul(mixed, m.w_out);
  return ad2::reshape(logits3, {y.shape()[0], n});
}

BitVec hard_output(const std::vector<double>& logits, const std::vector<double>& y) {
  if (logits.size() != y.size()) throw std::invalid_argument("hard_output: length mismatch");
  BitVec out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::uint8_t flip = logits[i] > 0.0 ? 1 : 0;
    out[i] = static_cast<std::uint8_t>((y[i] < 0.0 ? 1 : 0) ^ flip);
  }
  return out;
}

DecoderSpec make_neural_decoder(const DecoderModel& model, const BinaryMatrix& parity,
                                const std::string& id) {
  auto shared_model = std::make_shared<DecoderModel>(model);
  auto views = std::make_shared<CodeViews>(assemble_views(ad::tensor_from(parity)));
  // The connectivity map over a frozen code is a fixed tensor at inference.
  auto fixed_mask = std::make_shared<Tensor>(
      model.cfg.mask_mode == MaskMode::trainable_mask_v2
          ? ad::stop_gradient(model.mask_v2)
          : ad::stop_gradient(psi_map(model, build_mask(views->H))));

  DecoderSpec spec;
  spec.id = id;
  spec.preferred_workers = 1;  // forwards batch work to the tensor kernels
  const std::size_t n = model.cfg.n;
  spec.decode = [shared_model, views, fixed_mask, n](std::span<const double> y_flat,
                                                     std::size_t batch, double, std::uint8_t* out) {
    ForwardHooks hooks;
    hooks.fixed_mask = fixed_mask.get();
    const Tensor y = Tensor::constant({batch, n}, std::vector<double>(y_flat.begin(), y_flat.end()));
    const Tensor logits = decoder_forward(*shared_model, y, *views, hooks);
    const auto& lv = logits.values();
    const auto& yv = y.values();
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t flip = lv[b * n + i] > 0.0 ? 1 : 0;
        out[b * n + i] = static_cast<std::uint8_t>((yv[b * n + i] < 0.0 ? 1 : 0) ^ flip);
      }
  };
  return spec;
}

}  // namespace ecc

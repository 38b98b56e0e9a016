#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecc/autodiff.hpp"
#include "ecc/code_param.hpp"
#include "ecc/evaluate.hpp"

namespace ecc {

enum class MaskMode { code_mask, trainable_mask_v2, code_mask_stop_gradient };

MaskMode mask_mode_from_string(const std::string& s);
std::string to_string(MaskMode m);

struct DecoderConfig {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t layers = 2;   // N
  std::size_t dim = 32;     // d
  std::size_t heads = 8;    // h
  MaskMode mask_mode = MaskMode::code_mask;

  std::size_t tokens() const { return 2 * n - k; }  // magnitude + syndrome
  std::size_t head_dim() const { return dim / heads; }
};

// Masked-attention decoder over the codeword-invariant input
// [|y|, H bin(y)]. Three d-vectors embed the input, N pre-norm blocks of
// masked self-attention and a gated feed-forward (hidden 4d) follow, and the
// output head conditions on H. Parameter count is O(N d^2), independent of
// the code size.
struct DecoderModel {
  DecoderConfig cfg;

  ad::Tensor w_mag, w_syn0, w_syn1;  // (d)

  struct Layer {
    ad::Tensor ln1_g, ln1_b;
    ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Tensor ln2_g, ln2_b;
    ad::Tensor ff_w1, ff_b1;  // gelu branch, d -> 4d
    ad::Tensor ff_w2, ff_b2;  // gate branch, d -> 4d
    ad::Tensor ff_w3, ff_b3;  // 4d -> d
  };
  std::vector<Layer> layers;
  ad::Tensor lnf_g, lnf_b;

  // Connectivity map psi: path count -> mask value (1 -> 50 -> 1, ReLU).
  ad::Tensor psi_w1, psi_b1, psi_w2, psi_b2;
  ad::Tensor mask_v2;  // free (T x T) mask, only for MaskMode::trainable_mask_v2

  ad::Tensor w_m, w_s;  // (d x d) output projections
  ad::Tensor w_out;     // (d x 1)

  static DecoderModel init(const DecoderConfig& cfg, std::uint64_t seed);

  std::vector<ad::Tensor> parameters() const;        // everything trainable
  std::vector<ad::Tensor> theta_parameters() const;  // decoder weights
  std::vector<ad::Tensor> gamma_parameters() const;  // psi (or mask_v2)
  std::size_t parameter_count() const;
};

// Per-path gradient switches; tests zero individual omega paths, and the
// mask stop-gradient ablation reuses the mask switch.
struct ForwardHooks {
  bool grad_through_encoder = true;
  bool grad_through_syndrome = true;
  bool grad_through_mask = true;
  bool grad_through_output_head = true;
  // When set, used as the additive attention mask instead of psi(g(H));
  // inference precomputes it once per realized code.
  const ad::Tensor* fixed_mask = nullptr;
};

// Rows 1..n embed |y_i| via w_mag; rows n+1..2n-k pick w_syn0/w_syn1 by the
// (possibly soft) syndrome bit. mag: (B,n), syn: (B,n-k) -> (B, 2n-k, d).
ad::Tensor initial_embed(const DecoderModel& m, const ad::Tensor& mag, const ad::Tensor& syn);

// Elementwise psi over arbitrary-shape path counts.
ad::Tensor psi_map(const DecoderModel& m, const ad::Tensor& counts);

// One multi-head attention pass with the shared additive mask (already
// including any -inf diagonal handling the caller wants).
ad::Tensor masked_attention(const DecoderModel::Layer& layer, const DecoderConfig& cfg,
                            const ad::Tensor& x, const ad::Tensor& add_mask);

// y: (B,n) channel outputs (graph input); returns logits (B,n) predicting
// the multiplicative-noise bits (logit > 0 means "sign flipped").
ad::Tensor decoder_forward(const DecoderModel& m, const ad::Tensor& y, const CodeViews& code,
                           const ForwardHooks& hooks = {});

// x_hat = bin(y) XOR 1[logit > 0]; equals bin(sign(noise_estimate * y)).
BitVec hard_output(const std::vector<double>& logits, const std::vector<double>& y);

// Harness adapter; precomputes the additive mask from the realized code.
DecoderSpec make_neural_decoder(const DecoderModel& model, const BinaryMatrix& parity,
                                const std::string& id = "neural");

}  // namespace ecc

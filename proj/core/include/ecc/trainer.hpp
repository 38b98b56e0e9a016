#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecc/autodiff.hpp"
#include "ecc/code_param.hpp"
#include "ecc/decoder_net.hpp"
#include "ecc/rng.hpp"

namespace ecc {

enum class MessageMode { all_ones, random_bits };
enum class EncodeMode { polar, modulo_ste };

MessageMode message_mode_from_string(const std::string& s);
EncodeMode encode_mode_from_string(const std::string& s);
std::string to_string(MessageMode m);
std::string to_string(EncodeMode m);

struct TrainConfig {
  std::size_t n = 31;
  std::size_t k = 16;
  std::size_t layers = 2;
  std::size_t dim = 32;
  std::size_t heads = 8;

  // Reduced desk schedule; the full-scale recipe is 1000 x 1000 x 1024 with
  // the code frozen after epoch 800.
  std::size_t epochs = 120;
  std::size_t minibatches_per_epoch = 200;
  std::size_t batch_size = 256;
  double lr_start = 1e-4;
  double lr_end = 1e-6;  // cosine decay, no warmup
  std::size_t omega_freeze_epoch = 96;
  double omega_lr_scale = 1.0;
  double omega_init_scale = 0.01;  // c in omega = c * (1 - 2 omega0)
  double omega_clamp = 0.5;

  double train_ebno_lo_db = 3.0;
  double train_ebno_hi_db = 7.0;
  MessageMode message_mode = MessageMode::all_ones;
  EncodeMode encode_mode = EncodeMode::polar;
  MaskMode mask_mode = MaskMode::code_mask;
  bool fixed_omega = false;
  std::uint64_t seed = 0;

  DecoderConfig decoder() const { return {n, k, layers, dim, heads, mask_mode}; }
  void validate() const;  // throws std::invalid_argument
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::size_t omega_flips_prev = 0;  // realized parity bits changed vs previous epoch
  std::size_t omega_flips_init = 0;  // vs omega0
  double h_density = 0.0;
};

std::string metrics_csv(const std::vector<EpochMetrics>& metrics);

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Adam with bias correction; state is kept per parameter tensor and the
// same instance must be fed the same parameter list every step.
class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<const ad::Tensor> params, double lr);
  std::int64_t steps_taken() const { return t_; }

 private:
  struct State {
    std::vector<double> m, v;
  };
  std::unordered_map<ad::Node*, State> state_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_start, double lr_end);

// One minibatch: y is a graph tensor wired through the encoder views (so
// code gradients flow), targets are the realized multiplicative-noise bits.
struct SampleBatch {
  ad::Tensor y;        // (B, n)
  ad::Tensor targets;  // (B, n) constant
  std::vector<double> sigmas;
};

SampleBatch sample_batch(const CodeViews& views, const TrainConfig& cfg, Rng& rng,
                         const ForwardHooks& hooks = {});

// Forward + backward + Adam on theta/gamma, optionally omega (own learning
// rate scale, clamped afterwards). Returns the batch loss; throws
// TrainingError with diagnostics if the loss is not finite.
double train_step_on_batch(DecoderModel& model, OmegaParam& omega, const TrainConfig& cfg,
                           const CodeViews& views, const SampleBatch& batch, Adam& opt_model,
                           Adam& opt_omega, double lr, bool omega_active,
                           const ForwardHooks& hooks = {});

struct Checkpoint {
  TrainConfig config;
  DecoderModel model;
  OmegaParam omega;
  BinaryMatrix realized_h;  // frozen H at the end of training
  std::size_t epoch = 0;
  double running_loss = 0.0;
  std::vector<EpochMetrics> metrics;
};

// Full schedule: epochs x minibatches steps, cosine learning rate, omega
// updates stop at the freeze epoch, per-epoch metrics collected.
Checkpoint fit(const TrainConfig& cfg, const BinaryMatrix& omega0);

// Deterministic random parity part for omega0 (Bernoulli 1/2).
BinaryMatrix random_omega0(std::size_t k, std::size_t nk, std::uint64_t seed);

// Logits of the model on a deterministic probe batch; used for
// checkpoint round-trip identity checks.
std::vector<double> probe_logits(const DecoderModel& model, const BinaryMatrix& parity,
                                 std::uint64_t seed, std::size_t batch);

}  // namespace ecc

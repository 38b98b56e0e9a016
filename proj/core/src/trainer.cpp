#include "ecc/trainer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "ecc/channel.hpp"

namespace ecc {

namespace ad2 = ecc::ad;
using ad2::Tensor;

MessageMode message_mode_from_string(const std::string& s) {
  if (s == "all_ones") return MessageMode::all_ones;
  if (s == "random") return MessageMode::random_bits;
  throw std::invalid_argument("unknown message mode: " + s);
}

EncodeMode encode_mode_from_string(const std::string& s) {
  if (s == "polar") return EncodeMode::polar;
  if (s == "modulo_ste") return EncodeMode::modulo_ste;
  throw std::invalid_argument("unknown encode mode: " + s);
}

std::string to_string(MessageMode m) { return m == MessageMode::all_ones ? "all_ones" : "random"; }
std::string to_string(EncodeMode m) { return m == EncodeMode::polar ? "polar" : "modulo_ste"; }

void TrainConfig::validate() const {
  if (n <= k || k == 0) throw std::invalid_argument("TrainConfig: need 0 < k < n");
  if (dim == 0 || heads == 0 || dim % heads != 0)
    throw std::invalid_argument("TrainConfig: dim must be a positive multiple of heads");
  if (lr_end > lr_start) throw std::invalid_argument("TrainConfig: lr_end must be <= lr_start");
  if (omega_freeze_epoch > epochs)
    throw std::invalid_argument("TrainConfig: omega_freeze_epoch must be <= epochs");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be positive");
  if (train_ebno_hi_db < train_ebno_lo_db)
    throw std::invalid_argument("TrainConfig: bad training Eb/N0 range");
  if (omega_clamp <= 0.0 || omega_init_scale <= 0.0)
    throw std::invalid_argument("TrainConfig: omega scales must be positive");
}

std::string metrics_csv(const std::vector<EpochMetrics>& metrics) {
  std::ostringstream out;
  out << "epoch,loss,omega_flips_prev,omega_flips_init,h_density\n";
  out.precision(17);
  for (const EpochMetrics& m : metrics)
    out << m.epoch << ',' << m.loss << ',' << m.omega_flips_prev << ',' << m.omega_flips_init
        << ',' << m.h_density << '\n';
  return out.str();
}

void Adam::step(std::span<const ad::Tensor> params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const Tensor& p : params) {
    ad::Node* node = p.node().get();
    State& st = state_[node];
    if (st.m.size() != node->val.size()) {
      st.m.assign(node->val.size(), 0.0);
      st.v.assign(node->val.size(), 0.0);
    }
    if (node->grad.empty()) continue;  // no gradient reached this tensor
    for (std::size_t i = 0; i < node->val.size(); ++i) {
      const double g = node->grad[i];
      st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g;
      st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g * g;
      const double mhat = st.m[i] / bc1;
      const double vhat = st.v[i] / bc2;
      node->val[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_start, double lr_end) {
  if (total_steps <= 1) return lr_start;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(std::numbers::pi * progress));
}

SampleBatch sample_batch(const CodeViews& views, const TrainConfig& cfg, Rng& rng,
                         const ForwardHooks& hooks) {
  const std::size_t b = cfg.batch_size;
  const std::size_t n = views.n;
  const std::size_t k = views.k;

  std::vector<double> m_vals(b * k, 1.0);
  if (cfg.message_mode == MessageMode::random_bits)
    for (double& v : m_vals) v = static_cast<double>(rng.bit());
  const Tensor m = Tensor::constant({b, k}, std::move(m_vals));

  const Tensor g_enc = hooks.grad_through_encoder ? views.G : ad2::stop_gradient(views.G);
  const Tensor x = cfg.encode_mode == EncodeMode::polar ? ad2::gf2_polar_matmul(m, g_enc)
                                                        : ad2::modulo_ste_matmul(m, g_enc);

  SampleBatch out;
  out.sigmas.resize(b);
  std::vector<double> noise(b * n);
  for (std::size_t i = 0; i < b; ++i) {
    const double ebno = rng.uniform(cfg.train_ebno_lo_db, cfg.train_ebno_hi_db);
    out.sigmas[i] = noise_sigma(ebno, k, n);
    for (std::size_t j = 0; j < n; ++j) noise[i * n + j] = out.sigmas[i] * rng.gaussian();
  }

  // y = (1 - 2x) + noise through the soft codeword, so d y / d x = -2.
  out.y = ad2::add(ad2::affine(x, -2.0, 1.0), Tensor::constant({b, n}, std::move(noise)));

  // Targets are the realized multiplicative-noise bits bin(y) XOR x.
  const auto& yv = out.y.values();
  const auto& xv = x.values();
  std::vector<double> t(b * n);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double xbit = xv[i] > 0.5 ? 1.0 : 0.0;
    const double ybit = yv[i] < 0.0 ? 1.0 : 0.0;
    t[i] = xbit == ybit ? 0.0 : 1.0;
  }
  out.targets = Tensor::constant({b, n}, std::move(t));
  return out;
}

namespace {

double grad_norm(std::span<const Tensor> params) {
  double acc = 0.0;
  for (const Tensor& p : params)
    for (const double g : p.grad()) acc += g * g;
  return std::sqrt(acc);
}

}  // namespace

double train_step_on_batch(DecoderModel& model, OmegaParam& omega, const TrainConfig& cfg,
                           const CodeViews& views, const SampleBatch& batch, Adam& opt_model,
                           Adam& opt_omega, double lr, bool omega_active,
                           const ForwardHooks& hooks) {
  const auto params = model.parameters();
  for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
  omega.omega.zero_grad();

  const Tensor logits = decoder_forward(model, batch.y, views, hooks);
  const Tensor loss = ad2::bce_with_logits_mean(logits, batch.targets);
  ad2::backward(loss);

  const double loss_v = loss.value();
  if (!std::isfinite(loss_v)) {
    std::ostringstream msg;
    msg << "train_step: non-finite loss " << loss_v << " (lr=" << lr
        << ", |grad theta|=" << grad_norm(params) << ", |grad omega|="
        << grad_norm(std::span<const Tensor>(&omega.omega, 1)) << ")";
    throw TrainingError(msg.str());
  }

  opt_model.step(params, lr);
  if (omega_active) {
    opt_omega.step(std::span<const Tensor>(&omega.omega, 1), lr * cfg.omega_lr_scale);
    clamp(omega);
  }
  return loss_v;
}

Checkpoint fit(const TrainConfig& cfg, const BinaryMatrix& omega0) {
  cfg.validate();
  if (omega0.rows() != cfg.k || omega0.cols() != cfg.n - cfg.k)
    throw std::invalid_argument("fit: omega0 must be k x (n-k)");

  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.model = DecoderModel::init(cfg.decoder(), cfg.seed);
  ckpt.omega = init_omega(omega0, cfg.omega_init_scale, cfg.omega_clamp);

  Adam opt_model, opt_omega;
  Rng rng = Rng::split(cfg.seed, 0xBA7C4ull);

  BinaryMatrix prev_p = realized_parity(ckpt.omega);
  const BinaryMatrix init_p = prev_p;
  const std::size_t total_steps = cfg.epochs * cfg.minibatches_per_epoch;
  std::size_t step_idx = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const bool omega_active = !cfg.fixed_omega && epoch < cfg.omega_freeze_epoch;
    double loss_sum = 0.0;
    for (std::size_t mb = 0; mb < cfg.minibatches_per_epoch; ++mb) {
      const double lr = cosine_lr(step_idx, total_steps, cfg.lr_start, cfg.lr_end);
      // Frozen code: plain constant views, omega gradient is exactly zero.
      const CodeViews views =
          omega_active ? realize(ckpt.omega)
                       : assemble_views(ad2::tensor_from(realized_parity(ckpt.omega)));
      const SampleBatch batch = sample_batch(views, cfg, rng);
      loss_sum += train_step_on_batch(ckpt.model, ckpt.omega, cfg, views, batch, opt_model,
                                      opt_omega, lr, omega_active);
      ++step_idx;
    }
    const BinaryMatrix p = realized_parity(ckpt.omega);
    EpochMetrics em;
    em.epoch = epoch;
    em.loss = cfg.minibatches_per_epoch ? loss_sum / static_cast<double>(cfg.minibatches_per_epoch)
                                        : 0.0;
    em.omega_flips_prev = parity_diff_bits(p, prev_p);
    em.omega_flips_init = parity_diff_bits(p, init_p);
    const std::size_t nk = cfg.n - cfg.k;
    em.h_density = static_cast<double>(p.count_ones() + nk) / static_cast<double>(nk * cfg.n);
    ckpt.metrics.push_back(em);
    prev_p = p;
    ckpt.epoch = epoch + 1;
    ckpt.running_loss = em.loss;
  }

  ckpt.realized_h = Code::from_parity_part(realized_parity(ckpt.omega)).H;
  return ckpt;
}

BinaryMatrix random_omega0(std::size_t k, std::size_t nk, std::uint64_t seed) {
  Rng rng = Rng::split(seed, 0x03E6Aull);
  return BinaryMatrix::random(k, nk, rng);
}

std::vector<double> probe_logits(const DecoderModel& model, const BinaryMatrix& parity,
                                 std::uint64_t seed, std::size_t batch) {
  const CodeViews views = assemble_views(ad2::tensor_from(parity));
  Rng rng = Rng::split(seed, 0x9D0BEull);
  std::vector<double> yv(batch * model.cfg.n);
  for (double& v : yv) v = 1.0 + 0.7 * rng.gaussian();
  const Tensor y = Tensor::constant({batch, model.cfg.n}, std::move(yv));
  return decoder_forward(model, y, views).values();
}

}  // namespace ecc

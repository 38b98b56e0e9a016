#include "ecc/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace ecc {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'E', 'C', 'C', 'D', 'C', 'K', 'P', '\n'};

std::vector<std::pair<std::string, ad::Tensor>> named_tensors(const DecoderModel& m) {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  out.emplace_back("w_mag", m.w_mag);
  out.emplace_back("w_syn0", m.w_syn0);
  out.emplace_back("w_syn1", m.w_syn1);
  for (std::size_t l = 0; l < m.layers.size(); ++l) {
    const auto& lay = m.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    out.emplace_back(p + "ln1_g", lay.ln1_g);
    out.emplace_back(p + "ln1_b", lay.ln1_b);
    out.emplace_back(p + "wq", lay.wq);
    out.emplace_back(p + "bq", lay.bq);
    out.emplace_back(p + "wk", lay.wk);
    out.emplace_back(p + "bk", lay.bk);
    out.emplace_back(p + "wv", lay.wv);
    out.emplace_back(p + "bv", lay.bv);
    out.emplace_back(p + "wo", lay.wo);
    out.emplace_back(p + "bo", lay.bo);
    out.emplace_back(p + "ln2_g", lay.ln2_g);
    out.emplace_back(p + "ln2_b", lay.ln2_b);
    out.emplace_back(p + "ff_w1", lay.ff_w1);
    out.emplace_back(p + "ff_b1", lay.ff_b1);
    out.emplace_back(p + "ff_w2", lay.ff_w2);
    out.emplace_back(p + "ff_b2", lay.ff_b2);
    out.emplace_back(p + "ff_w3", lay.ff_w3);
    out.emplace_back(p + "ff_b3", lay.ff_b3);
  }
  out.emplace_back("lnf_g", m.lnf_g);
  out.emplace_back("lnf_b", m.lnf_b);
  out.emplace_back("psi_w1", m.psi_w1);
  out.emplace_back("psi_b1", m.psi_b1);
  out.emplace_back("psi_w2", m.psi_w2);
  out.emplace_back("psi_b2", m.psi_b2);
  if (m.cfg.mask_mode == MaskMode::trainable_mask_v2) out.emplace_back("mask_v2", m.mask_v2);
  out.emplace_back("w_m", m.w_m);
  out.emplace_back("w_s", m.w_s);
  out.emplace_back("w_out", m.w_out);
  return out;
}

json config_to_json(const TrainConfig& c) {
  return json{{"n", c.n},
              {"k", c.k},
              {"layers", c.layers},
              {"dim", c.dim},
              {"heads", c.heads},
              {"epochs", c.epochs},
              {"minibatches_per_epoch", c.minibatches_per_epoch},
              {"batch_size", c.batch_size},
              {"lr_start", c.lr_start},
              {"lr_end", c.lr_end},
              {"omega_freeze_epoch", c.omega_freeze_epoch},
              {"omega_lr_scale", c.omega_lr_scale},
              {"omega_init_scale", c.omega_init_scale},
              {"omega_clamp", c.omega_clamp},
              {"train_ebno_lo_db", c.train_ebno_lo_db},
              {"train_ebno_hi_db", c.train_ebno_hi_db},
              {"message_mode", to_string(c.message_mode)},
              {"encode_mode", to_string(c.encode_mode)},
              {"mask_mode", to_string(c.mask_mode)},
              {"fixed_omega", c.fixed_omega},
              {"seed", c.seed}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.n = j.at("n").get<std::size_t>();
  c.k = j.at("k").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.dim = j.at("dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.minibatches_per_epoch = j.at("minibatches_per_epoch").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr_start = j.at("lr_start").get<double>();
  c.lr_end = j.at("lr_end").get<double>();
  c.omega_freeze_epoch = j.at("omega_freeze_epoch").get<std::size_t>();
  c.omega_lr_scale = j.at("omega_lr_scale").get<double>();
  c.omega_init_scale = j.at("omega_init_scale").get<double>();
  c.omega_clamp = j.at("omega_clamp").get<double>();
  c.train_ebno_lo_db = j.at("train_ebno_lo_db").get<double>();
  c.train_ebno_hi_db = j.at("train_ebno_hi_db").get<double>();
  c.message_mode = message_mode_from_string(j.at("message_mode").get<std::string>());
  c.encode_mode = encode_mode_from_string(j.at("encode_mode").get<std::string>());
  c.mask_mode = mask_mode_from_string(j.at("mask_mode").get<std::string>());
  c.fixed_omega = j.at("fixed_omega").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json matrix_to_json(const BinaryMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::string s(m.cols(), '0');
    for (std::size_t c = 0; c < m.cols(); ++c)
      if (m.get(r, c)) s[c] = '1';
    rows.push_back(s);
  }
  return rows;
}

BinaryMatrix matrix_from_json(const json& rows) {
  std::vector<BitVec> out;
  for (const auto& row : rows) {
    const std::string s = row.get<std::string>();
    BitVec bits(s.size());
    for (std::size_t c = 0; c < s.size(); ++c) bits[c] = s[c] == '1' ? 1 : 0;
    out.push_back(std::move(bits));
  }
  return BinaryMatrix::from_rows(out);
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  auto tensors = named_tensors(ckpt.model);
  tensors.emplace_back("omega", ckpt.omega.omega);

  json manifest = json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    manifest.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }

  json metrics = json::array();
  for (const EpochMetrics& m : ckpt.metrics)
    metrics.push_back({m.epoch, m.loss, m.omega_flips_prev, m.omega_flips_init, m.h_density});

  json header{{"config", config_to_json(ckpt.config)},
              {"epoch", ckpt.epoch},
              {"running_loss", ckpt.running_loss},
              {"realized_h", matrix_to_json(ckpt.realized_h)},
              {"omega_clamp", ckpt.omega.clamp_bound},
              {"omega_init_scale", ckpt.omega.init_scale},
              {"metrics", metrics},
              {"tensors", manifest},
              {"total_doubles", offset}};
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t hlen = header_text.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(header_text.data(), static_cast<std::streamsize>(hlen));
  for (const auto& [name, t] : tensors) {
    const auto& v = t.values();
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  if (!out) throw CheckpointError("checkpoint write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());

  char magic[sizeof(kMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("corrupt checkpoint (bad magic): " + path.string());
  std::uint32_t version = 0;
  if (!in.read(reinterpret_cast<char*>(&version), sizeof(version)))
    throw CheckpointError("corrupt checkpoint (truncated version): " + path.string());
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " does not match supported version " +
                          std::to_string(kCheckpointVersion));
  std::uint64_t hlen = 0;
  if (!in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen)))
    throw CheckpointError("corrupt checkpoint (truncated header length): " + path.string());
  std::string header_text(hlen, '\0');
  if (!in.read(header_text.data(), static_cast<std::streamsize>(hlen)))
    throw CheckpointError("corrupt checkpoint (truncated header): " + path.string());

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint header: " + std::string(e.what()));
  }

  Checkpoint ckpt;
  ckpt.config = config_from_json(header.at("config"));
  ckpt.epoch = header.at("epoch").get<std::size_t>();
  ckpt.running_loss = header.at("running_loss").get<double>();
  ckpt.realized_h = matrix_from_json(header.at("realized_h"));
  for (const auto& row : header.at("metrics")) {
    EpochMetrics m;
    m.epoch = row.at(0).get<std::size_t>();
    m.loss = row.at(1).get<double>();
    m.omega_flips_prev = row.at(2).get<std::size_t>();
    m.omega_flips_init = row.at(3).get<std::size_t>();
    m.h_density = row.at(4).get<double>();
    ckpt.metrics.push_back(m);
  }

  ckpt.model = DecoderModel::init(ckpt.config.decoder(), ckpt.config.seed);
  ckpt.omega = init_omega(BinaryMatrix(ckpt.config.k, ckpt.config.n - ckpt.config.k),
                          header.at("omega_init_scale").get<double>(),
                          header.at("omega_clamp").get<double>());

  auto tensors = named_tensors(ckpt.model);
  tensors.emplace_back("omega", ckpt.omega.omega);

  const std::uint64_t total = header.at("total_doubles").get<std::uint64_t>();
  std::vector<double> payload(total);
  if (!in.read(reinterpret_cast<char*>(payload.data()),
               static_cast<std::streamsize>(total * sizeof(double))))
    throw CheckpointError("corrupt checkpoint (truncated payload): " + path.string());

  const auto& manifest = header.at("tensors");
  if (manifest.size() != tensors.size())
    throw CheckpointError("checkpoint tensor manifest does not match the model layout");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& entry = manifest.at(i);
    auto& [name, t] = tensors[i];
    if (entry.at("name").get<std::string>() != name)
      throw CheckpointError("checkpoint tensor order mismatch at " + name);
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != t.shape())
      throw CheckpointError("checkpoint tensor shape mismatch at " + name);
    const std::uint64_t off = entry.at("offset").get<std::uint64_t>();
    auto& vals = t.mutable_values();
    if (off + vals.size() > payload.size())
      throw CheckpointError("checkpoint payload out of range at " + name);
    std::copy(payload.begin() + static_cast<long>(off),
              payload.begin() + static_cast<long>(off + vals.size()), vals.begin());
  }
  return ckpt;
}

}  // namespace ecc

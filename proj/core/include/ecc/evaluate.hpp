#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecc/classic_decoders.hpp"
#include "ecc/gf2.hpp"

namespace ecc {

// A code prepared for evaluation: H kept in its original column order (the
// order BP runs on), G spanning the same codebook in that order. Built from
// an arbitrary parity-check matrix, including ones with redundant rows.
struct OrderedCode {
  std::string id;
  std::size_t n = 0;
  std::size_t k = 0;
  BinaryMatrix h;  // as loaded (may have redundant rows)
  BinaryMatrix g;  // k x n, g h^T = 0
};

OrderedCode prepare_code(const std::string& id, const BinaryMatrix& h_any);
OrderedCode prepare_code(const std::string& id, const Code& code);

// Batch decoder: reads `batch` received vectors of length n (row major) and
// writes the estimated codewords. sigma is the true channel noise level.
using DecodeBatchFn =
    std::function<void(std::span<const double> y_flat, std::size_t batch, double sigma,
                       std::uint8_t* xhat_flat)>;

struct DecoderSpec {
  std::string id;
  DecodeBatchFn decode;
  // 0 = use the harness default; 1 = decoder parallelizes internally.
  int preferred_workers = 0;
};

DecoderSpec make_hard_decision_decoder();
DecoderSpec make_bp_decoder(const OrderedCode& code, std::size_t iterations);
DecoderSpec make_ml_decoder(const OrderedCode& code, std::size_t max_k = kMlMaxMessageBits);

struct BerPoint {
  double ebno_db = 0.0;
  std::uint64_t bits_sent = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t frames_sent = 0;
  std::uint64_t frame_errors = 0;
  std::uint64_t decoder_failures = 0;
  bool censored = false;

  double ber() const { return bits_sent ? static_cast<double>(bit_errors) / bits_sent : 0.0; }
  double fer() const { return frames_sent ? static_cast<double>(frame_errors) / frames_sent : 0.0; }
  // Defined only when bit errors were observed.
  std::optional<double> neg_ln_ber() const;
};

struct EvalConfig {
  std::uint64_t min_codewords = 100000;
  std::uint64_t min_error_frames = 50;
  std::uint64_t hard_cap = 10000000;
  std::uint64_t shard_codewords = 1024;
  int workers = 0;  // 0 = max_threads()
  std::uint64_t seed = 0;
};

// Streams uniformly random messages through encode -> BPSK -> AWGN ->
// decode until both thresholds are met (>= min_codewords AND >=
// min_error_frames) or the hard cap censors the point. Codeword streams are
// sharded across workers with split seeds and merged in shard order, so a
// given (seed, workers) pair always produces identical counts.
BerPoint estimate_ber(const DecoderSpec& decoder, const OrderedCode& code, double ebno_db,
                      const EvalConfig& cfg);

struct BerReport {
  std::string code_id;
  struct Entry {
    std::string decoder_id;
    std::vector<BerPoint> points;  // sorted by ebno_db
  };
  std::vector<Entry> entries;
  std::uint64_t seed = 0;
  double wall_time_s = 0.0;
};

BerReport sweep(const std::vector<DecoderSpec>& decoders, const OrderedCode& code,
                const std::vector<double>& ebno_list, const EvalConfig& cfg);

enum class ReportFormat { csv, pretty_table };

std::string format_report(const BerReport& report, ReportFormat format);
void emit_report(const BerReport& report, const std::filesystem::path& path, ReportFormat format);

// Inverse of the CSV emitter; counts round-trip exactly.
BerReport parse_report_csv(const std::string& text);

}  // namespace ecc

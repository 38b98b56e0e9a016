#include "ecc/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "ecc/channel.hpp"
#include "ecc/code_io.hpp"
#include "ecc/parallel.hpp"
#include "ecc/rng.hpp"

namespace ecc {

namespace {

BinaryMatrix unpermuted_generator(const StandardizeResult& std_res) {
  const Code& code = std_res.code;
  BinaryMatrix g(code.k, code.n);
  for (std::size_t r = 0; r < code.k; ++r)
    for (std::size_t j = 0; j < code.n; ++j)
      if (code.G.get(r, j)) g.set(r, std_res.column_permutation[j], 1);
  return g;
}

}  // namespace

OrderedCode prepare_code(const std::string& id, const BinaryMatrix& h_any) {
  OrderedCode oc;
  oc.id = id;
  oc.n = h_any.cols();
  oc.h = h_any;

  BinaryMatrix h_basis = h_any;
  const auto rows = independent_rows(h_any);
  if (rows.size() != h_any.rows()) {
    BinaryMatrix reduced(rows.size(), h_any.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < h_any.cols(); ++c)
        if (h_any.get(rows[i], c)) reduced.set(i, c, 1);
    h_basis = reduced;
  }
  oc.k = oc.n - h_basis.rows();
  oc.g = unpermuted_generator(standardize(h_basis));

  if (gf2_matmul(oc.g, oc.h.transposed()).count_ones() != 0)
    throw std::logic_error("prepare_code: generator does not annihilate H");
  return oc;
}

OrderedCode prepare_code(const std::string& id, const Code& code) {
  OrderedCode oc;
  oc.id = id;
  oc.n = code.n;
  oc.k = code.k;
  oc.h = code.H;
  oc.g = code.G;
  return oc;
}

DecoderSpec make_hard_decision_decoder() {
  DecoderSpec spec;
  spec.id = "hard";
  spec.decode = [](std::span<const double> y, std::size_t batch, double, std::uint8_t* out) {
    const std::size_t n = batch ? y.size() / batch : 0;
    for (std::size_t i = 0; i < batch * n; ++i) out[i] = hard_bit(y[i]);
  };
  return spec;
}

DecoderSpec make_bp_decoder(const OrderedCode& code, std::size_t iterations) {
  DecoderSpec spec;
  spec.id = "bp" + std::to_string(iterations);
  auto graph = std::make_shared<TannerGraph>(code.h);
  const std::size_t n = code.n;
  spec.decode = [graph, iterations, n](std::span<const double> y, std::size_t batch, double sigma,
                                       std::uint8_t* out) {
    std::vector<double> yi(n);
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy(y.begin() + b * n, y.begin() + (b + 1) * n, yi.begin());
      const BpResult res = bp_decode(*graph, awgn_llr(yi, sigma), iterations);
      std::copy(res.hard.begin(), res.hard.end(), out + b * n);
    }
  };
  return spec;
}

DecoderSpec make_ml_decoder(const OrderedCode& code, std::size_t max_k) {
  if (code.k > max_k)
    throw std::invalid_argument("make_ml_decoder: k exceeds enumeration cap");
  DecoderSpec spec;
  spec.id = "ml";
  auto g = std::make_shared<BinaryMatrix>(code.g);
  const std::size_t n = code.n;
  spec.decode = [g, max_k, n](std::span<const double> y, std::size_t batch, double,
                              std::uint8_t* out) {
    std::vector<double> yi(n);
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy(y.begin() + b * n, y.begin() + (b + 1) * n, yi.begin());
      const MlResult res = ml_decode_rows(*g, yi, max_k);
      std::copy(res.codeword.begin(), res.codeword.end(), out + b * n);
    }
  };
  return spec;
}

std::optional<double> BerPoint::neg_ln_ber() const {
  if (bit_errors == 0 || bits_sent == 0) return std::nullopt;
  return -std::log(ber());
}

namespace {

struct ShardCounts {
  std::uint64_t codewords = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t frame_errors = 0;
  std::uint64_t decoder_failures = 0;
};

ShardCounts run_shard(const DecoderSpec& decoder, const OrderedCode& code, double sigma,
                      std::uint64_t n_codewords, Rng rng) {
  const std::size_t n = code.n;
  const std::size_t k = code.k;
  ShardCounts counts;

  std::vector<std::uint8_t> x(n_codewords * n);
  std::vector<double> y(n_codewords * n);
  BitVec m(k);
  for (std::uint64_t cw = 0; cw < n_codewords; ++cw) {
    for (std::size_t j = 0; j < k; ++j) m[j] = static_cast<std::uint8_t>(rng.bit());
    std::uint8_t* xr = x.data() + cw * n;
    std::fill(xr, xr + n, 0);
    for (std::size_t j = 0; j < k; ++j)
      if (m[j])
        for (std::size_t c = 0; c < n; ++c) xr[c] ^= static_cast<std::uint8_t>(code.g.get(j, c));
    double* yr = y.data() + cw * n;
    for (std::size_t c = 0; c < n; ++c)
      yr[c] = (1.0 - 2.0 * static_cast<double>(xr[c])) + sigma * rng.gaussian();
  }

  std::vector<std::uint8_t> xhat(n_codewords * n);
  try {
    decoder.decode(std::span<const double>(y.data(), y.size()), n_codewords, sigma, xhat.data());
  } catch (const std::exception&) {
    // A failing decoder counts every frame in the shard as an error.
    counts.codewords = n_codewords;
    counts.frame_errors = n_codewords;
    counts.decoder_failures = n_codewords;
    counts.bit_errors = 0;
    return counts;
  }

  counts.codewords = n_codewords;
  for (std::uint64_t cw = 0; cw < n_codewords; ++cw) {
    std::uint64_t errs = 0;
    const std::uint8_t* a = x.data() + cw * n;
    const std::uint8_t* b = xhat.data() + cw * n;
    for (std::size_t c = 0; c < n; ++c) errs += static_cast<std::uint64_t>(a[c] != b[c]);
    counts.bit_errors += errs;
    counts.frame_errors += errs > 0 ? 1 : 0;
  }
  return counts;
}

}  // namespace

BerPoint estimate_ber(const DecoderSpec& decoder, const OrderedCode& code, double ebno_db,
                      const EvalConfig& cfg) {
  if (cfg.min_codewords < 1) throw std::invalid_argument("estimate_ber: min_codewords must be >= 1");
  const double sigma = noise_sigma(ebno_db, code.k, code.n);

  int workers = cfg.workers > 0 ? cfg.workers : max_threads();
  if (decoder.preferred_workers > 0) workers = std::min(workers, decoder.preferred_workers);
  workers = std::max(1, workers);

  BerPoint point;
  point.ebno_db = ebno_db;

  std::uint64_t shard_index = 0;
  while (true) {
    const bool thresholds_met =
        point.frames_sent >= cfg.min_codewords && point.frame_errors >= cfg.min_error_frames;
    if (thresholds_met) break;
    if (point.frames_sent >= cfg.hard_cap) {
      point.censored = true;
      break;
    }

    const std::uint64_t remaining = cfg.hard_cap - point.frames_sent;
    std::vector<std::uint64_t> sizes;
    std::uint64_t planned = 0;
    for (int w = 0; w < workers && planned < remaining; ++w) {
      const std::uint64_t sz = std::min<std::uint64_t>(cfg.shard_codewords, remaining - planned);
      sizes.push_back(sz);
      planned += sz;
    }

    std::vector<ShardCounts> results(sizes.size());
    if (sizes.size() == 1) {
      results[0] = run_shard(decoder, code, sigma, sizes[0], Rng::split(cfg.seed, shard_index));
    } else {
      std::vector<std::thread> pool;
      for (std::size_t w = 0; w < sizes.size(); ++w) {
        pool.emplace_back([&, w] {
          results[w] = run_shard(decoder, code, sigma, sizes[w], Rng::split(cfg.seed, shard_index + w));
        });
      }
      for (auto& t : pool) t.join();
    }
    shard_index += sizes.size();

    for (const ShardCounts& sc : results) {
      point.frames_sent += sc.codewords;
      point.bits_sent += sc.codewords * code.n;
      point.bit_errors += sc.bit_errors;
      point.frame_errors += sc.frame_errors;
      point.decoder_failures += sc.decoder_failures;
    }
  }
  return point;
}

BerReport sweep(const std::vector<DecoderSpec>& decoders, const OrderedCode& code,
                const std::vector<double>& ebno_list, const EvalConfig& cfg) {
  if (decoders.empty() || ebno_list.empty())
    throw std::invalid_argument("sweep: decoders and ebno_list must be nonempty");

  const auto t0 = std::chrono::steady_clock::now();
  BerReport report;
  report.code_id = code.id;
  report.seed = cfg.seed;

  std::vector<double> ebnos = ebno_list;
  std::sort(ebnos.begin(), ebnos.end());

  std::uint64_t point_index = 0;
  for (const DecoderSpec& dec : decoders) {
    BerReport::Entry entry;
    entry.decoder_id = dec.id;
    for (const double ebno : ebnos) {
      EvalConfig point_cfg = cfg;
      std::uint64_t s = cfg.seed ^ (0x9E3779B97F4A7C15ull * (point_index + 1));
      point_cfg.seed = splitmix64(s);
      entry.points.push_back(estimate_ber(dec, code, ebno, point_cfg));
      ++point_index;
    }
    report.entries.push_back(std::move(entry));
  }
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string format_report(const BerReport& report, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::csv) {
    out << "code,decoder,ebno_db,bits,bit_errors,frames,frame_errors,ber,neg_ln_ber,censored\n";
    for (const auto& entry : report.entries) {
      for (const BerPoint& p : entry.points) {
        out << report.code_id << ',' << entry.decoder_id << ',' << p.ebno_db << ',' << p.bits_sent
            << ',' << p.bit_errors << ',' << p.frames_sent << ',' << p.frame_errors << ','
            << std::setprecision(17) << p.ber() << ',';
        if (const auto nlb = p.neg_ln_ber()) out << *nlb;
        out << ',' << (p.censored ? 1 : 0) << '\n';
      }
    }
    return out.str();
  }

  // Pretty table: one row per decoder, -ln(BER) per SNR column.
  std::vector<double> ebnos;
  for (const auto& entry : report.entries)
    for (const BerPoint& p : entry.points)
      if (std::find(ebnos.begin(), ebnos.end(), p.ebno_db) == ebnos.end())
        ebnos.push_back(p.ebno_db);
  std::sort(ebnos.begin(), ebnos.end());

  out << "code: " << report.code_id << "  (-ln BER)\n";
  out << std::left << std::setw(14) << "decoder";
  for (const double e : ebnos) out << std::right << std::setw(10) << e << " dB";
  out << '\n';
  for (const auto& entry : report.entries) {
    out << std::left << std::setw(14) << entry.decoder_id;
    for (const double e : ebnos) {
      const auto it = std::find_if(entry.points.begin(), entry.points.end(),
                                   [&](const BerPoint& p) { return p.ebno_db == e; });
      std::ostringstream cell;
      if (it == entry.points.end()) {
        cell << "-";
      } else if (const auto nlb = it->neg_ln_ber()) {
        cell << std::fixed << std::setprecision(2) << *nlb << (it->censored ? "*" : "");
      } else {
        cell << "inf" << (it->censored ? "*" : "");
      }
      out << std::right << std::setw(13) << cell.str();
    }
    out << '\n';
  }
  return out.str();
}

void emit_report(const BerReport& report, const std::filesystem::path& path, ReportFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_report: cannot write " + path.string());
  out << format_report(report, format);
}

BerReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("ber csv: empty input");

  BerReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() < 10) throw ParseError("ber csv: short row");
    report.code_id = fields[0];
    BerPoint p;
    p.ebno_db = std::stod(fields[2]);
    p.bits_sent = std::stoull(fields[3]);
    p.bit_errors = std::stoull(fields[4]);
    p.frames_sent = std::stoull(fields[5]);
    p.frame_errors = std::stoull(fields[6]);
    p.censored = fields[9] == "1";
    auto it = std::find_if(report.entries.begin(), report.entries.end(),
                           [&](const BerReport::Entry& e) { return e.decoder_id == fields[1]; });
    if (it == report.entries.end()) {
      report.entries.push_back({fields[1], {}});
      it = std::prev(report.entries.end());
    }
    it->points.push_back(p);
  }
  return report;
}

}  // namespace ecc

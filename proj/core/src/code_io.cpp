#include "ecc/code_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

namespace ecc {

namespace {

struct TokenReader {
  explicit TokenReader(const std::string& text) : in(text) {}

  long next(const char* what) {
    long v = 0;
    if (!(in >> v))
      throw ParseError(std::string("alist: missing ") + what + " near line " +
                       std::to_string(line_of_last_token()));
    return v;
  }

  std::size_t line_of_last_token() {
    // Count newlines up to the current stream position.
    const auto pos = in.tellg();
    if (pos < 0) return count_lines(in.str().size());
    return count_lines(static_cast<std::size_t>(pos));
  }

  std::size_t count_lines(std::size_t upto) {
    const std::string& s = in.str();
    std::size_t line = 1;
    for (std::size_t i = 0; i < upto && i < s.size(); ++i)
      if (s[i] == '\n') ++line;
    return line;
  }

  bool done() {
    long v;
    return !(in >> v);
  }

  std::istringstream in;
};

}  // namespace

BinaryMatrix parse_alist(const std::string& text) {
  TokenReader tr(text);
  const long n = tr.next("column count");
  const long m = tr.next("row count");
  if (n <= 0 || m <= 0) throw ParseError("alist: nonpositive dimensions");
  (void)tr.next("max column degree");
  (void)tr.next("max row degree");

  std::vector<long> col_deg(static_cast<std::size_t>(n));
  for (auto& d : col_deg) {
    d = tr.next("column degree");
    if (d < 0 || d > m) throw ParseError("alist: column degree out of range near line " +
                                         std::to_string(tr.line_of_last_token()));
  }
  std::vector<long> row_deg(static_cast<std::size_t>(m));
  for (auto& d : row_deg) {
    d = tr.next("row degree");
    if (d < 0 || d > n) throw ParseError("alist: row degree out of range near line " +
                                         std::to_string(tr.line_of_last_token()));
  }

  BinaryMatrix h(static_cast<std::size_t>(m), static_cast<std::size_t>(n));
  long col_entries = 0;
  for (long c = 0; c < n; ++c) {
    for (long j = 0; j < col_deg[static_cast<std::size_t>(c)]; ++j) {
      const long r = tr.next("column adjacency entry");
      if (r == 0) continue;  // zero padding
      if (r < 1 || r > m)
        throw ParseError("alist: adjacency index " + std::to_string(r) +
                         " out of range on line " + std::to_string(tr.line_of_last_token()));
      h.set(static_cast<std::size_t>(r - 1), static_cast<std::size_t>(c), 1);
      ++col_entries;
    }
  }
  // Row adjacency lists are redundant; read and cross-check them.
  long row_entries = 0;
  for (long r = 0; r < m; ++r) {
    for (long j = 0; j < row_deg[static_cast<std::size_t>(r)]; ++j) {
      const long c = tr.next("row adjacency entry");
      if (c == 0) continue;
      if (c < 1 || c > n)
        throw ParseError("alist: adjacency index " + std::to_string(c) +
                         " out of range on line " + std::to_string(tr.line_of_last_token()));
      if (!h.get(static_cast<std::size_t>(r), static_cast<std::size_t>(c - 1)))
        throw ParseError("alist: row list disagrees with column list on line " +
                         std::to_string(tr.line_of_last_token()));
      ++row_entries;
    }
  }
  if (col_entries != row_entries)
    throw ParseError("alist: column lists have " + std::to_string(col_entries) +
                     " entries but row lists have " + std::to_string(row_entries));
  if (static_cast<std::size_t>(col_entries) != h.count_ones())
    throw ParseError("alist: duplicate adjacency entries");
  return h;
}

std::string write_alist(const BinaryMatrix& h) {
  const std::size_t m = h.rows();
  const std::size_t n = h.cols();
  std::vector<std::vector<std::size_t>> col_adj(n), row_adj(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c)
      if (h.get(r, c)) {
        col_adj[c].push_back(r + 1);
        row_adj[r].push_back(c + 1);
      }
  std::size_t dmax_c = 0, dmax_r = 0;
  for (const auto& a : col_adj) dmax_c = std::max(dmax_c, a.size());
  for (const auto& a : row_adj) dmax_r = std::max(dmax_r, a.size());

  const auto join = [](const auto& values) {
    std::ostringstream line;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) line << ' ';
      line << values[i];
    }
    return line.str();
  };

  std::ostringstream out;
  out << n << ' ' << m << '\n' << dmax_c << ' ' << dmax_r << '\n';
  std::vector<std::size_t> degs;
  for (const auto& a : col_adj) degs.push_back(a.size());
  out << join(degs) << '\n';
  degs.clear();
  for (const auto& a : row_adj) degs.push_back(a.size());
  out << join(degs) << '\n';
  for (const auto& adj : col_adj) out << join(adj) << '\n';
  for (const auto& adj : row_adj) out << join(adj) << '\n';
  return out.str();
}

BinaryMatrix parse_dense(const std::string& text) {
  std::vector<BitVec> rows;
  std::size_t line_no = 0;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    BitVec row;
    std::size_t col_no = 0;
    for (const char ch : line) {
      ++col_no;
      if (ch == ' ' || ch == '\t' || ch == '\r' || ch == ',') continue;
      if (ch == '0' || ch == '1') {
        row.push_back(static_cast<std::uint8_t>(ch - '0'));
      } else {
        throw ParseError("dense: invalid character '" + std::string(1, ch) + "' at row " +
                         std::to_string(line_no) + " col " + std::to_string(col_no));
      }
    }
    if (row.empty()) continue;  // blank / trailing lines
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError("dense: row " + std::to_string(line_no) + " has " +
                       std::to_string(row.size()) + " entries, expected " +
                       std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("dense: no rows");
  return BinaryMatrix::from_rows(rows);
}

std::string write_dense(const BinaryMatrix& h) {
  std::ostringstream out;
  for (std::size_t r = 0; r < h.rows(); ++r) {
    for (std::size_t c = 0; c < h.cols(); ++c) out << (h.get(r, c) ? '1' : '0');
    out << '\n';
  }
  return out.str();
}

BinaryMatrix load_matrix(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  if (path.extension() == ".alist") return parse_alist(text);
  return parse_dense(text);
}

void save_matrix(const std::filesystem::path& path, const BinaryMatrix& h) {
  write_text_file(path, path.extension() == ".alist" ? write_alist(h) : write_dense(h));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

BinaryMatrix builtin_parity_check(const std::string& name) {
  if (name == "repetition_3_1") {
    return BinaryMatrix::from_rows({{1, 1, 0}, {1, 0, 1}});
  }
  if (name == "hamming_7_4") {
    // Cyclic form: shifts of the parity polynomial x^4 + x^2 + x + 1.
    return BinaryMatrix::from_rows({{1, 0, 1, 1, 1, 0, 0},
                                    {0, 1, 0, 1, 1, 1, 0},
                                    {0, 0, 1, 0, 1, 1, 1}});
  }
  throw std::invalid_argument("unknown builtin code: " + name);
}

bool is_builtin_code(const std::string& name) {
  return name == "repetition_3_1" || name == "hamming_7_4";
}

}  // namespace ecc

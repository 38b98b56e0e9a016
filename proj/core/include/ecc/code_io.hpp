#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "ecc/gf2.hpp"

namespace ecc {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// alist layout: "n m", max column/row degrees, per-column degrees, per-row
// degrees, then 1-indexed adjacency lists (column lists first). Zero padding
// entries are tolerated, as emitted by several public code databases.
BinaryMatrix parse_alist(const std::string& text);
std::string write_alist(const BinaryMatrix& h);

// Lines of 0/1 characters, optionally space separated; one matrix row each.
BinaryMatrix parse_dense(const std::string& text);
std::string write_dense(const BinaryMatrix& h);

// Dispatches on extension: .alist -> alist, anything else -> dense.
BinaryMatrix load_matrix(const std::filesystem::path& path);
void save_matrix(const std::filesystem::path& path, const BinaryMatrix& h);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Named builtin parity-check matrices: "hamming_7_4" (cyclic form),
// "repetition_3_1". Throws std::invalid_argument for unknown names.
BinaryMatrix builtin_parity_check(const std::string& name);
bool is_builtin_code(const std::string& name);

}  // namespace ecc

#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "treeprox/common.hpp"
#include "treeprox/matrix.hpp"
#include "treeprox/sparse.hpp"

namespace treeprox {

/// Shortest decimal string that round-trips the double exactly.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  check(ec == std::errc(), "format_double: conversion failed");
  return std::string(buf, end);
}

inline constexpr const char* kMatrixMarketHeader =
    "%%MatrixMarket matrix coordinate real general";

/// Coordinate-format writer, 1-based indices, one entry per stored value.
/// Entries stream in row-major CSR order so identical matrices serialize to
/// identical bytes. Extra comment lines go after the header, each prefixed
/// with "% ".
inline void write_matrix_market(std::ostream& os, const CsrMatrix& m,
                                const std::vector<std::string>& comments = {}) {
  os << kMatrixMarketHeader << '\n';
  for (const std::string& c : comments) os << "% " << c << '\n';
  os << m.n_rows << ' ' << m.n_cols << ' ' << m.nnz() << '\n';
  for (idx i = 0; i < m.n_rows; ++i)
    for (idx e = m.row_ptr[i]; e < m.row_ptr[i + 1]; ++e)
      os << (i + 1) << ' ' << (m.col_idx[e] + 1) << ' ' << format_double(m.values[e]) << '\n';
}

inline void write_matrix_market_file(const std::string& path, const CsrMatrix& m,
                                     const std::vector<std::string>& comments = {}) {
  std::ofstream os(path, std::ios::binary);  // binary: no \r\n translation
  check(os.good(), "cannot open for writing: " + path);
  write_matrix_market(os, m, comments);
  os.flush();
  check(os.good(), "write failed: " + path);
}

/// Dense matrices are written through the same coordinate format with exact
/// zeros skipped, which keeps one writer and one reader.
inline void write_matrix_market(std::ostream& os, const Matrix& m,
                                const std::vector<std::string>& comments = {}) {
  std::vector<Triplet> entries;
  for (idx i = 0; i < m.rows; ++i)
    for (idx j = 0; j < m.cols; ++j)
      if (m(i, j) != 0.0) entries.push_back({i, j, m(i, j)});
  write_matrix_market(os, from_triplets(m.rows, m.cols, entries), comments);
}

inline CsrMatrix read_matrix_market(std::istream& is) {
  std::string line;
  idx line_no = 0;
  bool header_parsed = false;

  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '%' && header_parsed) continue;  // comment
      return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError("matrix market: empty input", 1);
  {
    std::istringstream hs(line);
    std::string banner, object, fmt, field, symmetry;
    hs >> banner >> object >> fmt >> field >> symmetry;
    if (banner != "%%MatrixMarket" || object != "matrix" || fmt != "coordinate" ||
        field != "real" || symmetry != "general")
      throw ParseError("matrix market: unsupported header: " + line, line_no);
  }
  header_parsed = true;

  if (!next_line()) throw ParseError("matrix market: missing size line", line_no);
  idx n_rows = 0, n_cols = 0, n_entries = 0;
  {
    std::istringstream ss(line);
    if (!(ss >> n_rows >> n_cols >> n_entries))
      throw ParseError("matrix market: bad size line: " + line, line_no);
    if (n_rows < 0 || n_cols < 0 || n_entries < 0)
      throw ParseError("matrix market: negative size", line_no);
  }

  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(n_entries));
  for (idx k = 0; k < n_entries; ++k) {
    if (!next_line()) throw ParseError("matrix market: truncated entry list", line_no);
    std::istringstream ss(line);
    idx i = 0, j = 0;
    double v = 0.0;
    if (!(ss >> i >> j >> v)) throw ParseError("matrix market: bad entry: " + line, line_no);
    if (i < 1 || i > n_rows || j < 1 || j > n_cols)
      throw ParseError("matrix market: entry index out of range: " + line, line_no);
    entries.push_back({i - 1, j - 1, v});
  }
  return from_triplets(n_rows, n_cols, entries);
}

inline CsrMatrix read_matrix_market_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "cannot open for reading: " + path);
  return read_matrix_market(is);
}

}  // namespace treeprox

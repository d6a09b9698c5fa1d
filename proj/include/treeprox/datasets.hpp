#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "treeprox/common.hpp"
#include "treeprox/matrix.hpp"
#include "treeprox/rng.hpp"

namespace treeprox {

struct Dataset {
  Matrix X{0, 0};
  std::vector<double> y;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_csv_number(const std::string& token, idx line_no) {
  const char* b = token.data();
  const char* e = b + token.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e)
    throw ParseError("csv: not a number: '" + token + "'", line_no);
  if (!std::isfinite(v)) throw ParseError("csv: non-finite value: '" + token + "'", line_no);
  return v;
}

}  // namespace detail

/// Comma-separated numeric table, first row a header; the named column
/// becomes the label, the rest the features in header order.
inline Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "cannot open for reading: " + path);

  std::string line;
  idx line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(is, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError("csv: empty file", 1);
  const std::vector<std::string> header = detail::split_csv_line(line);
  idx label_idx = -1;
  for (idx c = 0; c < static_cast<idx>(header.size()); ++c)
    if (header[c] == label_column) {
      if (label_idx >= 0) throw ParseError("csv: duplicate label column " + label_column, line_no);
      label_idx = c;
    }
  if (label_idx < 0)
    throw ParseError("csv: label column '" + label_column + "' not in header", line_no);
  const idx n_cols = static_cast<idx>(header.size());
  check(n_cols >= 2, "csv: need at least one feature column besides the label");

  std::vector<double> flat;
  std::vector<double> labels;
  idx n_rows = 0;
  while (next_line()) {
    const std::vector<std::string> cells = detail::split_csv_line(line);
    if (static_cast<idx>(cells.size()) != n_cols)
      throw ParseError("csv: expected " + std::to_string(n_cols) + " fields, got " +
                           std::to_string(cells.size()),
                       line_no);
    for (idx c = 0; c < n_cols; ++c) {
      const double v = detail::parse_csv_number(cells[c], line_no);
      if (c == label_idx)
        labels.push_back(v);
      else
        flat.push_back(v);
    }
    ++n_rows;
  }
  if (n_rows == 0) throw ParseError("csv: no data rows", line_no);

  Dataset ds;
  ds.X = Matrix(n_rows, n_cols - 1);
  ds.X.data = std::move(flat);
  ds.y = std::move(labels);
  return ds;
}

namespace detail {

inline std::uint32_t read_be32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  check(is.good(), "idx: truncated header in " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

/// IDX image/label pair (the MNIST container format): big-endian magic
/// 0x00000803 for unsigned-byte images, 0x00000801 for labels. Pixels load
/// as raw 0..255 doubles; thresholds on raw intensities split the same
/// partition as any monotone rescaling would.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  check(imgs.good(), "cannot open for reading: " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  check(labs.good(), "cannot open for reading: " + labels_path);

  const std::uint32_t img_magic = detail::read_be32(imgs, images_path);
  check(img_magic == 0x0000'0803u, "idx: bad image magic in " + images_path);
  const idx n = detail::read_be32(imgs, images_path);
  const idx h = detail::read_be32(imgs, images_path);
  const idx w = detail::read_be32(imgs, images_path);
  check(n >= 1 && h >= 1 && w >= 1, "idx: empty image file " + images_path);

  const std::uint32_t lab_magic = detail::read_be32(labs, labels_path);
  check(lab_magic == 0x0000'0801u, "idx: bad label magic in " + labels_path);
  const idx n_labels = detail::read_be32(labs, labels_path);
  check(n_labels == n, "idx: image/label count mismatch");

  Dataset ds;
  ds.X = Matrix(n, h * w);
  std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
  for (idx i = 0; i < n; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    check(imgs.good(), "idx: truncated image data in " + images_path);
    double* row = ds.X.row(i);
    for (std::size_t k = 0; k < buf.size(); ++k) row[k] = static_cast<double>(buf[k]);
  }
  ds.y.resize(static_cast<std::size_t>(n));
  for (idx i = 0; i < n; ++i) {
    unsigned char c;
    labs.read(reinterpret_cast<char*>(&c), 1);
    check(labs.good(), "idx: truncated label data in " + labels_path);
    ds.y[i] = static_cast<double>(c);
  }
  return ds;
}

struct BlobsConfig {
  idx n_classes = 10;
  idx n_features = 6;
  double center_scale = 6.0;   // centers drawn uniformly in [-scale, scale]^p
  double cluster_std = 1.0;
  double label_noise = 0.1;    // fraction of labels resampled uniformly
  std::uint64_t seed = 0;
};

/// Isotropic Gaussian blobs with noisy labels. The noise keeps leaves from
/// swallowing whole clusters, so leaf sizes (and with them proximity-row
/// sparsity) stay bounded as n grows.
inline Dataset make_blobs(idx n, const BlobsConfig& cfg = {}) {
  check(n >= 1, "make_blobs: need at least one sample");
  check(cfg.n_classes >= 2, "make_blobs: need at least two classes");
  check(cfg.n_features >= 1, "make_blobs: need at least one feature");
  check(cfg.cluster_std > 0.0 && cfg.center_scale > 0.0, "make_blobs: scales must be positive");
  check(cfg.label_noise >= 0.0 && cfg.label_noise <= 1.0, "make_blobs: label_noise in [0,1]");

  Rng rng(cfg.seed);
  Matrix centers(cfg.n_classes, cfg.n_features);
  for (idx c = 0; c < cfg.n_classes; ++c)
    for (idx f = 0; f < cfg.n_features; ++f)
      centers(c, f) = (2.0 * rng.uniform() - 1.0) * cfg.center_scale;

  Dataset ds;
  ds.X = Matrix(n, cfg.n_features);
  ds.y.resize(static_cast<std::size_t>(n));
  for (idx i = 0; i < n; ++i) {
    const idx c = static_cast<idx>(rng.bounded(static_cast<std::uint64_t>(cfg.n_classes)));
    for (idx f = 0; f < cfg.n_features; ++f)
      ds.X(i, f) = centers(c, f) + cfg.cluster_std * rng.normal();
    const idx noisy = static_cast<idx>(rng.bounded(static_cast<std::uint64_t>(cfg.n_classes)));
    const bool flip = rng.uniform() < cfg.label_noise;
    ds.y[i] = static_cast<double>(flip ? noisy : c);
  }
  return ds;
}

/// Two spherical Gaussians, balanced labels, means separated along the
/// first coordinate.
inline Dataset make_two_gaussians(idx n, idx n_features, double separation,
                                  std::uint64_t seed) {
  check(n >= 2, "make_two_gaussians: need at least two samples");
  check(n_features >= 1, "make_two_gaussians: need at least one feature");
  Rng rng(seed);
  Dataset ds;
  ds.X = Matrix(n, n_features);
  ds.y.resize(static_cast<std::size_t>(n));
  for (idx i = 0; i < n; ++i) {
    const idx c = i % 2;
    ds.y[i] = static_cast<double>(c);
    for (idx f = 0; f < n_features; ++f) ds.X(i, f) = rng.normal();
    ds.X(i, 0) += (c == 0) ? 0.0 : separation;
  }
  return ds;
}

}  // namespace treeprox

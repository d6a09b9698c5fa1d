#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "treeprox/common.hpp"

namespace treeprox {

/// Dense row-major matrix of doubles. Used for feature matrices and for
/// small dense reconstructions in tests and audits.
struct Matrix {
  idx rows = 0;
  idx cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(idx r, idx c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(idx i, idx j) { return data[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(idx i, idx j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  const double* row(idx i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
  double* row(idx i) { return data.data() + static_cast<std::size_t>(i) * cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  /// Copy of the first n rows.
  Matrix head_rows(idx n) const {
    Matrix out(n, cols);
    std::copy(data.begin(), data.begin() + static_cast<std::size_t>(n) * cols,
              out.data.begin());
    return out;
  }
};

}  // namespace treeprox

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "treeprox/common.hpp"
#include "treeprox/matrix.hpp"

namespace treeprox {

struct Triplet {
  idx row;
  idx col;
  double value;
};

/// Compressed sparse row matrix. After finalization row_ptr is monotone,
/// columns are strictly increasing within each row, and all stored values
/// are finite. Values are never thresholded: sparsity is structural.
struct CsrMatrix {
  idx n_rows = 0;
  idx n_cols = 0;
  std::vector<idx> row_ptr;  // size n_rows + 1
  std::vector<idx> col_idx;  // size nnz
  std::vector<double> values;

  CsrMatrix() : row_ptr(1, 0) {}
  CsrMatrix(idx rows, idx cols) : n_rows(rows), n_cols(cols), row_ptr(rows + 1, 0) {}

  idx nnz() const { return row_ptr.empty() ? 0 : row_ptr.back(); }

  idx row_nnz(idx i) const { return row_ptr[i + 1] - row_ptr[i]; }

  /// (column, value) pairs of row i.
  std::vector<std::pair<idx, double>> row_slice(idx i) const {
    check(i >= 0 && i < n_rows, "row_slice: row index out of range");
    std::vector<std::pair<idx, double>> out;
    out.reserve(static_cast<std::size_t>(row_nnz(i)));
    for (idx e = row_ptr[i]; e < row_ptr[i + 1]; ++e)
      out.emplace_back(col_idx[e], values[e]);
    return out;
  }

  /// Structural well-formedness; cheap enough to call after every kernel.
  void validate() const {
    check(n_rows >= 0 && n_cols >= 0, "csr: negative dimension");
    check(static_cast<idx>(row_ptr.size()) == n_rows + 1, "csr: row_ptr size");
    check(row_ptr.front() == 0, "csr: row_ptr[0] != 0");
    check(row_ptr.back() == static_cast<idx>(col_idx.size()), "csr: row_ptr[n] != nnz");
    check(col_idx.size() == values.size(), "csr: col/value size mismatch");
    for (idx i = 0; i < n_rows; ++i) {
      check(row_ptr[i] <= row_ptr[i + 1], "csr: row_ptr not monotone");
      for (idx e = row_ptr[i]; e < row_ptr[i + 1]; ++e) {
        check(col_idx[e] >= 0 && col_idx[e] < n_cols, "csr: column out of range");
        if (e > row_ptr[i]) check(col_idx[e - 1] < col_idx[e], "csr: columns not sorted");
        check(std::isfinite(values[e]), "csr: non-finite value");
      }
    }
  }
};

/// Build a CSR matrix from (row, col, value) entries. Duplicates at the same
/// coordinate are summed; entries that are (or sum to) exactly zero are
/// dropped; rows come out sorted.
inline CsrMatrix from_triplets(idx n_rows, idx n_cols, const std::vector<Triplet>& entries) {
  check(n_rows >= 0 && n_cols >= 0, "from_triplets: negative dimension");
  for (const Triplet& t : entries) {
    check(t.row >= 0 && t.row < n_rows, "from_triplets: row index out of range");
    check(t.col >= 0 && t.col < n_cols, "from_triplets: column index out of range");
    check(std::isfinite(t.value), "from_triplets: non-finite value");
  }

  // counting sort by row keeps input order within a row, so duplicate
  // accumulation order (and thus the FP result) is reproducible
  std::vector<idx> per_row(static_cast<std::size_t>(n_rows) + 1, 0);
  for (const Triplet& t : entries) per_row[t.row + 1]++;
  std::partial_sum(per_row.begin(), per_row.end(), per_row.begin());
  std::vector<std::pair<idx, double>> slot(entries.size());  // (col, value) grouped by row
  {
    std::vector<idx> cursor(per_row.begin(), per_row.end() - 1);
    for (const Triplet& t : entries) slot[cursor[t.row]++] = {t.col, t.value};
  }

  CsrMatrix m(n_rows, n_cols);
  m.col_idx.reserve(entries.size());
  m.values.reserve(entries.size());
  std::vector<std::pair<idx, idx>> order;  // (col, position) for stable col sort
  for (idx i = 0; i < n_rows; ++i) {
    order.clear();
    for (idx e = per_row[i]; e < per_row[i + 1]; ++e) order.emplace_back(slot[e].first, e);
    std::sort(order.begin(), order.end());
    idx k = 0;
    const idx m_in_row = static_cast<idx>(order.size());
    while (k < m_in_row) {
      const idx col = order[k].first;
      double sum = 0.0;
      while (k < m_in_row && order[k].first == col) sum += slot[order[k++].second].second;
      if (sum != 0.0) {
        m.col_idx.push_back(col);
        m.values.push_back(sum);
      }
    }
    m.row_ptr[i + 1] = static_cast<idx>(m.col_idx.size());
  }
  m.validate();
  return m;
}

/// Exact transpose; output rows are sorted by construction.
inline CsrMatrix transpose(const CsrMatrix& a) {
  CsrMatrix t(a.n_cols, a.n_rows);
  const idx nnz = a.nnz();
  t.col_idx.resize(static_cast<std::size_t>(nnz));
  t.values.resize(static_cast<std::size_t>(nnz));
  for (idx e = 0; e < nnz; ++e) t.row_ptr[a.col_idx[e] + 1]++;
  std::partial_sum(t.row_ptr.begin(), t.row_ptr.end(), t.row_ptr.begin());
  std::vector<idx> cursor(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (idx i = 0; i < a.n_rows; ++i) {
    for (idx e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e) {
      const idx pos = cursor[a.col_idx[e]]++;
      t.col_idx[pos] = i;
      t.values[pos] = a.values[e];
    }
  }
  return t;
}

/// C = A * B^T for CSR A (M x K) and B (N x K).
///
/// Row-wise Gustavson over the transpose of B: for each stored A(i,k) the
/// samples listed in column k of B are gathered through a dense accumulator
/// of size n_rows(B). Two passes (symbolic, then numeric) so the output
/// layout is identical for any thread count. Structural zeros produced by
/// cancellation are kept; output rows are sorted by column.
inline CsrMatrix spgemm_transposed(const CsrMatrix& a, const CsrMatrix& b, int threads = 1) {
  check(a.n_cols == b.n_cols, "spgemm_transposed: inner dimension mismatch");
  const CsrMatrix bt = transpose(b);
  CsrMatrix c(a.n_rows, b.n_rows);

  // symbolic pass: exact nnz per output row
  parallel_for(0, a.n_rows, threads, [&](idx lo, idx hi) {
    std::vector<idx> stamp(static_cast<std::size_t>(b.n_rows), -1);
    for (idx i = lo; i < hi; ++i) {
      idx count = 0;
      for (idx e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e) {
        const idx k = a.col_idx[e];
        for (idx f = bt.row_ptr[k]; f < bt.row_ptr[k + 1]; ++f) {
          const idx j = bt.col_idx[f];
          if (stamp[j] != i) {
            stamp[j] = i;
            ++count;
          }
        }
      }
      c.row_ptr[i + 1] = count;
    }
  });
  std::partial_sum(c.row_ptr.begin(), c.row_ptr.end(), c.row_ptr.begin());
  c.col_idx.resize(static_cast<std::size_t>(c.nnz()));
  c.values.resize(static_cast<std::size_t>(c.nnz()));

  // numeric pass
  parallel_for(0, a.n_rows, threads, [&](idx lo, idx hi) {
    std::vector<idx> stamp(static_cast<std::size_t>(b.n_rows), -1);
    std::vector<double> acc(static_cast<std::size_t>(b.n_rows), 0.0);
    std::vector<idx> touched;
    for (idx i = lo; i < hi; ++i) {
      touched.clear();
      for (idx e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e) {
        const idx k = a.col_idx[e];
        const double av = a.values[e];
        for (idx f = bt.row_ptr[k]; f < bt.row_ptr[k + 1]; ++f) {
          const idx j = bt.col_idx[f];
          if (stamp[j] != i) {
            stamp[j] = i;
            acc[j] = av * bt.values[f];
            touched.push_back(j);
          } else {
            acc[j] += av * bt.values[f];
          }
        }
      }
      std::sort(touched.begin(), touched.end());
      idx pos = c.row_ptr[i];
      for (idx j : touched) {
        c.col_idx[pos] = j;
        c.values[pos] = acc[j];
        ++pos;
      }
    }
  });
  return c;
}

/// Dense reconstruction. Guarded: intended for tests and small audits only.
inline Matrix to_dense(const CsrMatrix& a, idx max_cells = 10'000'000) {
  check(a.n_rows * a.n_cols <= max_cells, "to_dense: matrix too large");
  Matrix d(a.n_rows, a.n_cols);
  for (idx i = 0; i < a.n_rows; ++i)
    for (idx e = a.row_ptr[i]; e < a.row_ptr[i + 1]; ++e) d(i, a.col_idx[e]) = a.values[e];
  return d;
}

}  // namespace treeprox

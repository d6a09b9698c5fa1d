#pragma once

#include <vector>

#include "treeprox/common.hpp"
#include "treeprox/forest.hpp"
#include "treeprox/matrix.hpp"
#include "treeprox/proximity.hpp"

namespace treeprox {

inline constexpr idx kNaiveOracleGuard = 20'000;

/// One proximity row by direct pairwise transcription of the definition:
/// out[j] = Σ_t q(i,t)·w(j,t)·[leaf_i(t) = leaf_j(t)], trees in ascending
/// order. Deliberately shares nothing with the factorized path beyond
/// apply() and the scheme weight definitions. q(i,·) is precomputed per row
/// since it does not depend on j.
inline void proximity_naive_row(const LeafAssignment& query_assign, idx i,
                                const LeafAssignment& train_assign,
                                const SchemeWeights& scheme, std::vector<double>& q_row,
                                double* out) {
  const idx T = train_assign.n_trees;
  const idx n = train_assign.n_rows;
  q_row.resize(static_cast<std::size_t>(T));
  for (idx t = 0; t < T; ++t) q_row[t] = scheme.query_weight(i, t);
  const std::uint32_t* li = query_assign.row(i);
  for (idx j = 0; j < n; ++j) {
    const std::uint32_t* lj = train_assign.row(j);
    double sum = 0.0;
    for (idx t = 0; t < T; ++t)
      if (li[t] == lj[t]) {
        const double q = q_row[t];
        if (q != 0.0) sum += q * scheme.reference_weight(j, t);
      }
    out[j] = sum;
  }
}

/// w(j,t) materialized once, row-major per reference sample. Under rf-gap a
/// reference weight costs a multiplicity lookup, a leaf lookup, and a divide
/// against the per-tree mass table; paying that per collision inside an
/// N-squared loop is pure waste, so matrix-sized callers build this table up
/// front and the row kernel streams it instead.
struct NaiveReferenceTable {
  idx n_trees = 0;
  std::vector<double> w;

  static NaiveReferenceTable build(const SchemeWeights& scheme, idx n_rows) {
    NaiveReferenceTable tab;
    tab.n_trees = scheme.n_trees();
    tab.w.resize(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(tab.n_trees));
    for (idx j = 0; j < n_rows; ++j) {
      double* row = tab.w.data() + static_cast<std::size_t>(j) * tab.n_trees;
      for (idx t = 0; t < tab.n_trees; ++t) row[t] = scheme.reference_weight(j, t);
    }
    return tab;
  }

  const double* row(idx j) const {
    return w.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(n_trees);
  }
};

/// Same transcription with the reference weights read from the table. The
/// operands and summation order match the function above exactly, so the two
/// variants produce bit-identical rows.
inline void proximity_naive_row(const LeafAssignment& query_assign, idx i,
                                const LeafAssignment& train_assign,
                                const SchemeWeights& scheme, const NaiveReferenceTable& ref,
                                std::vector<double>& q_row, double* out) {
  const idx T = train_assign.n_trees;
  const idx n = train_assign.n_rows;
  q_row.resize(static_cast<std::size_t>(T));
  for (idx t = 0; t < T; ++t) q_row[t] = scheme.query_weight(i, t);
  const std::uint32_t* li = query_assign.row(i);
  for (idx j = 0; j < n; ++j) {
    const std::uint32_t* lj = train_assign.row(j);
    const double* wj = ref.row(j);
    double sum = 0.0;
    for (idx t = 0; t < T; ++t)
      if (li[t] == lj[t]) {
        const double q = q_row[t];
        if (q != 0.0) sum += q * wj[t];
      }
    out[j] = sum;
  }
}

/// Full dense N×N proximity matrix, row at a time. Memory-guarded; the
/// streaming row function above is the tool for anything larger.
inline Matrix proximity_naive(const Ensemble& ens, const Matrix& X_train, Scheme scheme,
                              idx guard = kNaiveOracleGuard) {
  check(X_train.rows <= guard, "proximity_naive: N exceeds the dense-oracle guard");
  const SchemeContext ctx = SchemeContext::build(ens, X_train, scheme);
  const SchemeWeights weights = ctx.weights();
  const NaiveReferenceTable ref = NaiveReferenceTable::build(weights, ctx.train_assign.n_rows);
  Matrix p(ctx.train_assign.n_rows, ctx.train_assign.n_rows);
  std::vector<double> q_row;
  for (idx i = 0; i < ctx.train_assign.n_rows; ++i)
    proximity_naive_row(ctx.train_assign, i, ctx.train_assign, weights, ref, q_row, p.row(i));
  return p;
}

}  // namespace treeprox

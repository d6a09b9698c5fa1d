#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "treeprox/bagging.hpp"
#include "treeprox/common.hpp"
#include "treeprox/forest.hpp"
#include "treeprox/sparse.hpp"

namespace treeprox {

enum class Scheme { original, rf_gap, gbt };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::original: return "original";
    case Scheme::rf_gap: return "rf-gap";
    case Scheme::gbt: return "gbt";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& name) {
  if (name == "original") return Scheme::original;
  if (name == "rf-gap") return Scheme::rf_gap;
  if (name == "gbt") return Scheme::gbt;
  throw ConfigError("unknown scheme: " + name + " (expected original|rf-gap|gbt)");
}

/// Column space of the factors: one column per leaf across all trees,
/// blocks ordered by tree, columns inside a block by local leaf id.
struct LeafIndexMap {
  std::vector<idx> offsets;  // size T+1, offsets[T] = total_leaves
  idx total_leaves = 0;

  static LeafIndexMap build(const Ensemble& ens) {
    LeafIndexMap m;
    m.offsets.resize(static_cast<std::size_t>(ens.n_trees()) + 1, 0);
    for (idx t = 0; t < ens.n_trees(); ++t)
      m.offsets[t + 1] = m.offsets[t] + ens.trees[t].leaf_count;
    m.total_leaves = m.offsets.back();
    return m;
  }

  idx global_index(idx tree, idx local_leaf) const { return offsets[tree] + local_leaf; }

  idx tree_of(idx column) const {
    check(column >= 0 && column < total_leaves, "leaf map: column out of range");
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), column);
    return static_cast<idx>(it - offsets.begin()) - 1;
  }

  idx local_leaf_of(idx column) const { return column - offsets[tree_of(column)]; }
};

/// Per-scheme weight functions q(i,t) (query side) and w(j,t) (reference
/// side). Each depends only on its own sample index plus per-tree metadata,
/// which is exactly what makes the proximity factorize. Both the factor
/// builder and the pairwise oracle evaluate weights through this class, so
/// the two paths multiply bit-identical operands.
class SchemeWeights {
 public:
  static SchemeWeights original(idx n_trees) {
    check(n_trees >= 1, "scheme: need at least one tree");
    SchemeWeights s;
    s.scheme_ = Scheme::original;
    s.n_trees_ = n_trees;
    s.uniform_q_ = 1.0 / static_cast<double>(n_trees);
    return s;
  }

  static SchemeWeights rf_gap(const Ensemble& ens, const LeafAssignment& train_assign,
                              const LeafMass& mass) {
    if (!ens.bagging.bootstrap)
      throw ConfigError("rf-gap scheme requires an ensemble trained with bootstrap");
    check(train_assign.n_rows == ens.n_train, "scheme: assignment row count mismatch");
    check(train_assign.n_trees == ens.n_trees(), "scheme: assignment tree count mismatch");
    check(static_cast<idx>(mass.mass.size()) == ens.n_trees(), "scheme: leaf mass shape");
    if (ens.bagging.never_oob_count == ens.n_train)
      throw ConfigError("rf-gap scheme: no sample is ever out-of-bag; train more trees");
    SchemeWeights s;
    s.scheme_ = Scheme::rf_gap;
    s.n_trees_ = ens.n_trees();
    s.bagging_ = &ens.bagging;
    s.train_assign_ = &train_assign;
    s.mass_ = &mass;
    return s;
  }

  static SchemeWeights gbt(const Ensemble& ens) {
    SchemeWeights s;
    s.scheme_ = Scheme::gbt;
    s.n_trees_ = ens.n_trees();
    double sum = 0.0;
    for (double w : ens.tree_weights) {
      check(std::isfinite(w), "gbt scheme: non-finite tree weight");
      sum += w;
    }
    if (!(sum > 0.0)) throw ConfigError("gbt scheme: tree weights must sum to a positive value");
    s.gbt_q_.resize(ens.tree_weights.size());
    for (std::size_t t = 0; t < ens.tree_weights.size(); ++t)
      s.gbt_q_[t] = ens.tree_weights[t] / sum;
    return s;
  }

  Scheme scheme() const { return scheme_; }
  idx n_trees() const { return n_trees_; }

  /// Training samples that never fall out of bag produce all-zero query
  /// rows under rf-gap; callers surface this as a warning.
  idx never_oob_count() const {
    return scheme_ == Scheme::rf_gap ? bagging_->never_oob_count : 0;
  }

  double query_weight(idx i, idx t) const {
    switch (scheme_) {
      case Scheme::original:
        return uniform_q_;
      case Scheme::rf_gap: {
        if (!bagging_->is_oob(i, t)) return 0.0;
        const idx s_i = bagging_->oob_counts[i];
        return s_i > 0 ? 1.0 / static_cast<double>(s_i) : 0.0;
      }
      case Scheme::gbt:
        return gbt_q_[t];
    }
    return 0.0;
  }

  double reference_weight(idx j, idx t) const {
    if (scheme_ != Scheme::rf_gap) return 1.0;
    const std::uint32_t c = bagging_->mult(j, t);
    if (c == 0) return 0.0;
    const std::uint32_t leaf = train_assign_->at(j, t);
    return static_cast<double>(c) / static_cast<double>(mass_->at(t, leaf));
  }

 private:
  Scheme scheme_ = Scheme::original;
  idx n_trees_ = 0;
  double uniform_q_ = 0.0;
  std::vector<double> gbt_q_;
  const BaggingRecord* bagging_ = nullptr;
  const LeafAssignment* train_assign_ = nullptr;
  const LeafMass* mass_ = nullptr;
};

inline SchemeWeights scheme_original(idx n_trees) { return SchemeWeights::original(n_trees); }

inline SchemeWeights scheme_rf_gap(const Ensemble& ens, const LeafAssignment& train_assign,
                                   const LeafMass& mass) {
  return SchemeWeights::rf_gap(ens, train_assign, mass);
}

inline SchemeWeights scheme_gbt(const Ensemble& ens) { return SchemeWeights::gbt(ens); }

namespace detail {

/// One CSR factor: row i holds weight(i,t) at the global column of i's leaf
/// in tree t, for every tree where the weight is non-zero. Tree blocks are
/// ascending, so rows come out column-sorted with at most T entries.
template <typename WeightFn>
CsrMatrix build_factor(const LeafIndexMap& map, const LeafAssignment& assign,
                       idx n_trees, WeightFn&& weight) {
  CsrMatrix f(assign.n_rows, map.total_leaves);
  for (idx i = 0; i < assign.n_rows; ++i) {
    idx count = 0;
    for (idx t = 0; t < n_trees; ++t)
      if (weight(i, t) != 0.0) ++count;
    f.row_ptr[i + 1] = count;
  }
  std::partial_sum(f.row_ptr.begin(), f.row_ptr.end(), f.row_ptr.begin());
  f.col_idx.resize(static_cast<std::size_t>(f.nnz()));
  f.values.resize(static_cast<std::size_t>(f.nnz()));
  for (idx i = 0; i < assign.n_rows; ++i) {
    idx pos = f.row_ptr[i];
    const std::uint32_t* leaves = assign.row(i);
    for (idx t = 0; t < n_trees; ++t) {
      const double v = weight(i, t);
      if (v == 0.0) continue;
      f.col_idx[pos] = map.global_index(t, static_cast<idx>(leaves[t]));
      f.values[pos] = v;
      ++pos;
    }
  }
  return f;
}

}  // namespace detail

struct ProximityFactors {
  LeafIndexMap map;
  CsrMatrix query_factor;      // Q
  CsrMatrix reference_factor;  // W
};

/// Build Q and W for the training set against an explicit column map:
/// P = Q Wᵀ.
inline ProximityFactors build_factors(const Ensemble& ens, const LeafAssignment& assign,
                                      const SchemeWeights& scheme, LeafIndexMap map) {
  check(assign.n_trees == ens.n_trees(), "build_factors: assignment tree count mismatch");
  check(scheme.n_trees() == ens.n_trees(), "build_factors: scheme tree count mismatch");
  ProximityFactors out;
  out.map = std::move(map);
  out.query_factor = detail::build_factor(
      out.map, assign, ens.n_trees(),
      [&](idx i, idx t) { return scheme.query_weight(i, t); });
  out.reference_factor = detail::build_factor(
      out.map, assign, ens.n_trees(),
      [&](idx j, idx t) { return scheme.reference_weight(j, t); });
  return out;
}

inline ProximityFactors build_factors(const Ensemble& ens, const LeafAssignment& assign,
                                      const SchemeWeights& scheme) {
  return build_factors(ens, assign, scheme, LeafIndexMap::build(ens));
}

/// Column map for distrusted models: blocks still sized by each tree's
/// declared leaf_count, but the column space is padded to cover every leaf
/// id actually present. A leaf id past its own block then lands inside a
/// later tree's block (or the padding) instead of out of bounds, and the
/// sparse-vs-naive cross-check measures the damage. Bounded so a wild id
/// cannot make downstream kernels allocate absurd column counts.
inline LeafIndexMap audit_leaf_map(const Ensemble& ens) {
  LeafIndexMap map = LeafIndexMap::build(ens);
  idx needed = map.total_leaves;
  for (idx t = 0; t < ens.n_trees(); ++t)
    for (const TreeNode& nd : ens.trees[t].nodes)
      if (nd.is_leaf()) needed = std::max(needed, map.offsets[t] + nd.leaf_id + 1);
  check(needed <= 2 * map.total_leaves + 4096,
        "audit: leaf ids too far outside their trees' blocks to cross-check");
  map.total_leaves = needed;
  return map;
}

/// Everything the scheme functions need, bundled so call sites build it
/// once. weights() constructs a fresh view each call; the view borrows this
/// context and the ensemble, so both must outlive it.
struct SchemeContext {
  const Ensemble* ens = nullptr;
  Scheme scheme = Scheme::original;
  LeafAssignment train_assign;
  LeafMass mass;  // filled for rf-gap only

  static SchemeContext build(const Ensemble& ens, const Matrix& X_train, Scheme scheme,
                             int threads = 1) {
    check(X_train.rows == ens.n_train, "scheme context: training row count mismatch");
    SchemeContext ctx;
    ctx.ens = &ens;
    ctx.scheme = scheme;
    ctx.train_assign = apply(ens, X_train, threads);
    if (scheme == Scheme::rf_gap) ctx.mass = compute_leaf_mass(ens, ctx.train_assign);
    return ctx;
  }

  SchemeWeights weights() const {
    switch (scheme) {
      case Scheme::original: return scheme_original(ens->n_trees());
      case Scheme::rf_gap: return scheme_rf_gap(*ens, train_assign, mass);
      case Scheme::gbt: return scheme_gbt(*ens);
    }
    throw ConfigError("scheme context: unknown scheme");
  }
};

/// Training-set proximity matrix P = Q Wᵀ.
inline CsrMatrix proximity_sparse(const Ensemble& ens, const Matrix& X_train, Scheme scheme,
                                  int threads = 1) {
  const SchemeContext ctx = SchemeContext::build(ens, X_train, scheme, threads);
  const ProximityFactors f = build_factors(ens, ctx.train_assign, ctx.weights());
  return spgemm_transposed(f.query_factor, f.reference_factor, threads);
}

/// Proximities of out-of-sample rows against the training set. Bags carry
/// no information about unseen points, so rf-gap queries fall back to
/// uniform 1/T query weights over all trees; the reference side keeps the
/// scheme's training-set weights.
inline CsrMatrix proximity_query_rows(const Ensemble& ens, const Matrix& X_train,
                                      const Matrix& X_new, Scheme scheme, int threads = 1) {
  const SchemeContext ctx = SchemeContext::build(ens, X_train, scheme, threads);
  const LeafAssignment new_assign = apply(ens, X_new, threads);
  const LeafIndexMap map = LeafIndexMap::build(ens);
  const SchemeWeights weights = ctx.weights();
  const SchemeWeights query_side =
      (scheme == Scheme::rf_gap) ? scheme_original(ens.n_trees()) : weights;
  const CsrMatrix q = detail::build_factor(
      map, new_assign, ens.n_trees(),
      [&](idx i, idx t) { return query_side.query_weight(i, t); });
  const CsrMatrix w = detail::build_factor(
      map, ctx.train_assign, ens.n_trees(),
      [&](idx j, idx t) { return weights.reference_weight(j, t); });
  return spgemm_transposed(q, w, threads);
}

}  // namespace treeprox

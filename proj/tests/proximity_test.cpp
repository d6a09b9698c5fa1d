#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "treeprox/datasets.hpp"
#include "treeprox/forest.hpp"
#include "treeprox/oracle.hpp"
#include "treeprox/proximity.hpp"
#include "treeprox/sparse.hpp"

using namespace treeprox;

namespace {

Ensemble blob_forest(idx n, idx trees, std::uint64_t seed, Matrix* x_out,
                     bool bootstrap = true) {
  const Dataset ds = make_blobs(n, [&] {
    BlobsConfig c;
    c.n_classes = 3;
    c.n_features = 4;
    c.seed = seed;
    return c;
  }());
  TrainConfig cfg;
  cfg.n_trees = trees;
  cfg.seed = seed;
  cfg.bootstrap = bootstrap;
  cfg.min_samples_leaf = 2;
  *x_out = ds.X;
  return train_forest(ds.X, ds.y, cfg);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (idx i = 0; i < a.rows; ++i)
    for (idx j = 0; j < a.cols; ++j) worst = std::max(worst, std::abs(a(i, j) - b(i, j)));
  return worst;
}

}  // namespace

TEST(SchemeParsing, NamesRoundTrip) {
  EXPECT_EQ(parse_scheme("original"), Scheme::original);
  EXPECT_EQ(parse_scheme("rf-gap"), Scheme::rf_gap);
  EXPECT_EQ(parse_scheme("gbt"), Scheme::gbt);
  EXPECT_STREQ(scheme_name(Scheme::rf_gap), "rf-gap");
  EXPECT_THROW(parse_scheme("jaccard"), ConfigError);
}

TEST(LeafIndexMapTest, ColumnsBijectWithTreeLeaves) {
  Matrix x;
  const Ensemble ens = blob_forest(100, 7, 5, &x);
  const LeafIndexMap map = LeafIndexMap::build(ens);

  idx total = 0;
  for (const Tree& t : ens.trees) total += t.leaf_count;
  EXPECT_EQ(map.total_leaves, total);
  ASSERT_EQ(map.offsets.size(), 8u);
  EXPECT_EQ(map.offsets.front(), 0);
  EXPECT_EQ(map.offsets.back(), total);

  for (idx t = 0; t < ens.n_trees(); ++t)
    for (idx l = 0; l < ens.trees[t].leaf_count; ++l) {
      const idx col = map.global_index(t, l);
      EXPECT_EQ(map.tree_of(col), t);
      EXPECT_EQ(map.local_leaf_of(col), l);
    }
  EXPECT_THROW(map.tree_of(total), std::invalid_argument);
  EXPECT_THROW(map.tree_of(-1), std::invalid_argument);
}

TEST(Factors, OriginalRowsAreUniformAndFull) {
  Matrix x;
  const Ensemble ens = blob_forest(60, 4, 11, &x);
  const LeafAssignment assign = apply(ens, x);
  const ProximityFactors f = build_factors(ens, assign, scheme_original(4));

  for (idx i = 0; i < 60; ++i) {
    ASSERT_EQ(f.query_factor.row_nnz(i), 4);
    ASSERT_EQ(f.reference_factor.row_nnz(i), 4);
    idx prev_col = -1;
    for (const auto& [col, val] : f.query_factor.row_slice(i)) {
      EXPECT_DOUBLE_EQ(val, 0.25);
      EXPECT_GT(col, prev_col);  // ascending tree blocks keep rows sorted
      prev_col = col;
      EXPECT_EQ(f.map.local_leaf_of(col), static_cast<idx>(assign.at(i, f.map.tree_of(col))));
    }
    for (const auto& [col, val] : f.reference_factor.row_slice(i)) EXPECT_DOUBLE_EQ(val, 1.0);
  }
}

TEST(Factors, RfGapQueryRowsSpreadOverOobTrees) {
  Matrix x;
  const Ensemble ens = blob_forest(80, 12, 13, &x);
  const SchemeContext ctx = SchemeContext::build(ens, x, Scheme::rf_gap);
  const ProximityFactors f = build_factors(ens, ctx.train_assign, ctx.weights());

  for (idx i = 0; i < 80; ++i) {
    const idx s_i = ens.bagging.oob_counts[i];
    EXPECT_EQ(f.query_factor.row_nnz(i), s_i);
    for (const auto& [col, val] : f.query_factor.row_slice(i))
      EXPECT_DOUBLE_EQ(val, 1.0 / static_cast<double>(s_i));
    // reference entries are in-bag multiplicity over leaf mass
    for (const auto& [col, val] : f.reference_factor.row_slice(i)) {
      const idx t = f.map.tree_of(col);
      const std::uint32_t c = ens.bagging.mult(i, t);
      ASSERT_GT(c, 0u);
      EXPECT_DOUBLE_EQ(val, static_cast<double>(c) /
                                static_cast<double>(ctx.mass.at(t, ctx.train_assign.at(i, t))));
    }
  }
}

TEST(Factors, RowNnzNeverExceedsTreeCount) {
  Matrix x;
  const Ensemble ens = blob_forest(70, 9, 17, &x);
  for (Scheme s : {Scheme::original, Scheme::rf_gap, Scheme::gbt}) {
    const SchemeContext ctx = SchemeContext::build(ens, x, s);
    const ProximityFactors f = build_factors(ens, ctx.train_assign, ctx.weights());
    for (idx i = 0; i < 70; ++i) {
      EXPECT_LE(f.query_factor.row_nnz(i), 9);
      EXPECT_LE(f.reference_factor.row_nnz(i), 9);
    }
    EXPECT_LE(f.query_factor.nnz() + f.reference_factor.nnz(), 2 * 70 * 9);
  }
}

TEST(ProximitySparse, SingleLeafTreesGiveAllOnes) {
  Matrix x(3, 2);
  for (idx i = 0; i < 3; ++i)
    for (idx j = 0; j < 2; ++j) x(i, j) = 4.0;  // identical rows: no split possible
  TrainConfig cfg;
  cfg.n_trees = 2;
  const Ensemble ens = train_forest(x, {0.0, 1.0, 0.0}, cfg);
  const Matrix p = to_dense(proximity_sparse(ens, x, Scheme::original));
  for (idx i = 0; i < 3; ++i)
    for (idx j = 0; j < 3; ++j) EXPECT_EQ(p(i, j), 1.0);
}

TEST(ProximitySparse, OriginalDiagonalAndSymmetryAreExact) {
  Matrix x;
  const Ensemble ens = blob_forest(50, 8, 19, &x);  // dyadic T: 8 * (1/8) is exact
  const Matrix p = to_dense(proximity_sparse(ens, x, Scheme::original));
  for (idx i = 0; i < 50; ++i) {
    EXPECT_EQ(p(i, i), 1.0);
    for (idx j = i + 1; j < 50; ++j) EXPECT_EQ(p(i, j), p(j, i));
  }
}

TEST(ProximitySparse, MatchesNaiveOracleOnAllSchemes) {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Matrix x;
    const Ensemble ens = blob_forest(60, 6, seed, &x);
    for (Scheme s : {Scheme::original, Scheme::rf_gap, Scheme::gbt}) {
      const Matrix sparse = to_dense(proximity_sparse(ens, x, s));
      const Matrix naive = proximity_naive(ens, x, s);
      EXPECT_LE(max_abs_diff(sparse, naive), 1e-12)
          << "scheme " << scheme_name(s) << " seed " << seed;
    }
  }
}

TEST(ProximitySparse, NoBootstrapSchemesMatchNaiveToo) {
  Matrix x;
  const Ensemble ens = blob_forest(50, 5, 23, &x, /*bootstrap=*/false);
  for (Scheme s : {Scheme::original, Scheme::gbt}) {
    const Matrix sparse = to_dense(proximity_sparse(ens, x, s));
    const Matrix naive = proximity_naive(ens, x, s);
    EXPECT_LE(max_abs_diff(sparse, naive), 1e-12);
  }
}

TEST(ProximitySparse, RfGapRowsSumToOneWithZeroDiagonal) {
  Matrix x;
  const Ensemble ens = blob_forest(90, 15, 29, &x);
  const Matrix p = to_dense(proximity_sparse(ens, x, Scheme::rf_gap));
  idx summed = 0;
  for (idx i = 0; i < 90; ++i) {
    EXPECT_EQ(p(i, i), 0.0);  // q is OOB-only, w is in-bag-only: products vanish
    if (ens.bagging.oob_counts[i] == 0) continue;  // all-zero row by design
    double row = 0.0;
    for (idx j = 0; j < 90; ++j) row += p(i, j);
    EXPECT_NEAR(row, 1.0, 1e-9);
    ++summed;
  }
  EXPECT_GE(summed, 85);
}

TEST(ProximitySparse, RfGapNeverOobSampleGetsZeroRow) {
  Matrix x;
  Ensemble ens = blob_forest(40, 6, 31, &x);
  // pull sample 0 into every bag by hand
  for (idx t = 0; t < 6; ++t)
    if (ens.bagging.mult(0, t) == 0)
      ens.bagging.multiplicity[static_cast<std::size_t>(0) * 6 + t] = 1;
  ens.bagging.refresh_summaries();
  ASSERT_GE(ens.bagging.never_oob_count, 1);
  ASSERT_LT(ens.bagging.never_oob_count, 40);

  const SchemeContext ctx = SchemeContext::build(ens, x, Scheme::rf_gap);
  const SchemeWeights weights = ctx.weights();
  EXPECT_GE(weights.never_oob_count(), 1);
  const ProximityFactors f = build_factors(ens, ctx.train_assign, weights);
  EXPECT_EQ(f.query_factor.row_nnz(0), 0);
  const Matrix p = to_dense(spgemm_transposed(f.query_factor, f.reference_factor));
  for (idx j = 0; j < 40; ++j) EXPECT_EQ(p(0, j), 0.0);
}

TEST(ProximitySparse, GbtUniformWeightsReproduceOriginal) {
  Matrix x;
  const Ensemble ens = blob_forest(55, 7, 37, &x);  // tree_weights default to 1.0
  const Matrix gbt = to_dense(proximity_sparse(ens, x, Scheme::gbt));
  const Matrix orig = to_dense(proximity_sparse(ens, x, Scheme::original));
  EXPECT_LE(max_abs_diff(gbt, orig), 1e-12);
}

TEST(ProximitySparse, GbtCustomWeightsMatchNaive) {
  Matrix x;
  Ensemble ens = blob_forest(45, 5, 41, &x);
  ens.tree_weights = {0.5, 2.0, 0.25, 1.25, 0.05};
  const Matrix sparse = to_dense(proximity_sparse(ens, x, Scheme::gbt));
  const Matrix naive = proximity_naive(ens, x, Scheme::gbt);
  EXPECT_LE(max_abs_diff(sparse, naive), 1e-12);
  // diagonal still hits Σ q_t = 1 exactly up to rounding: every tree matches
  for (idx i = 0; i < 45; ++i) EXPECT_NEAR(sparse(i, i), 1.0, 1e-12);
}

TEST(QueryRows, TrainingRowsReproduceTheirProximityRows) {
  Matrix x;
  const Ensemble ens = blob_forest(64, 6, 43, &x);
  const Matrix p = to_dense(proximity_sparse(ens, x, Scheme::original));
  const Matrix q = to_dense(proximity_query_rows(ens, x, x.head_rows(10), Scheme::original));
  ASSERT_EQ(q.rows, 10);
  ASSERT_EQ(q.cols, 64);
  for (idx i = 0; i < 10; ++i)
    for (idx j = 0; j < 64; ++j) EXPECT_EQ(q(i, j), p(i, j));
}

TEST(QueryRows, RfGapQueriesUseUniformFallbackAndSumToOne) {
  Matrix x;
  const Ensemble ens = blob_forest(64, 8, 47, &x);
  const Dataset fresh = make_blobs(12, [] {
    BlobsConfig c;
    c.n_classes = 3;
    c.n_features = 4;
    c.seed = 1234;
    return c;
  }());
  const Matrix q = to_dense(proximity_query_rows(ens, x, fresh.X, Scheme::rf_gap));
  ASSERT_EQ(q.rows, 12);
  for (idx i = 0; i < 12; ++i) {
    double row = 0.0;
    for (idx j = 0; j < 64; ++j) row += q(i, j);
    EXPECT_NEAR(row, 1.0, 1e-9);  // every tree's leaf masses normalize to 1
  }
}

TEST(QueryRows, EmptyQueryGivesEmptyMatrix) {
  Matrix x;
  const Ensemble ens = blob_forest(30, 4, 53, &x);
  const CsrMatrix q = proximity_query_rows(ens, x, Matrix(0, 4), Scheme::original);
  EXPECT_EQ(q.n_rows, 0);
  EXPECT_EQ(q.n_cols, 30);
  EXPECT_EQ(q.nnz(), 0);
}

TEST(SchemeErrors, RfGapNeedsBootstrap) {
  Matrix x;
  const Ensemble ens = blob_forest(40, 4, 59, &x, /*bootstrap=*/false);
  EXPECT_THROW(proximity_sparse(ens, x, Scheme::rf_gap), ConfigError);
}

TEST(SchemeErrors, RfGapNeedsSomeOobSample) {
  Matrix x;
  Ensemble ens = blob_forest(20, 3, 61, &x);
  std::fill(ens.bagging.multiplicity.begin(), ens.bagging.multiplicity.end(), 1u);
  ens.bagging.refresh_summaries();
  ASSERT_EQ(ens.bagging.never_oob_count, 20);
  EXPECT_THROW(proximity_sparse(ens, x, Scheme::rf_gap), ConfigError);
}

TEST(SchemeErrors, GbtNeedsPositiveWeightSum) {
  Matrix x;
  Ensemble ens = blob_forest(20, 3, 67, &x);
  ens.tree_weights = {0.0, 0.0, 0.0};
  EXPECT_THROW(scheme_gbt(ens), ConfigError);
  ens.tree_weights = {1.0, std::nan(""), 1.0};
  EXPECT_THROW(scheme_gbt(ens), std::invalid_argument);
}

TEST(SchemeErrors, OriginalNeedsATree) {
  EXPECT_THROW(scheme_original(0), std::invalid_argument);
}

TEST(AuditLeafMap, CleanModelsKeepTheirColumnSpace) {
  Matrix x;
  const Ensemble ens = blob_forest(50, 5, 71, &x);
  const LeafIndexMap plain = LeafIndexMap::build(ens);
  const LeafIndexMap audit = audit_leaf_map(ens);
  EXPECT_EQ(audit.total_leaves, plain.total_leaves);
  EXPECT_EQ(audit.offsets, plain.offsets);
}

TEST(AuditLeafMap, PadsForLeafIdsPastTheLastBlock) {
  Matrix x;
  Ensemble ens = blob_forest(50, 3, 73, &x);
  const idx last = ens.n_trees() - 1;
  for (TreeNode& nd : ens.trees[last].nodes)
    if (nd.is_leaf()) {
      nd.leaf_id = ens.trees[last].leaf_count;  // one column past the end
      break;
    }
  const idx clean_total = LeafIndexMap::build(ens).total_leaves;
  const LeafIndexMap audit = audit_leaf_map(ens);
  EXPECT_EQ(audit.total_leaves, clean_total + 1);

  // factors built against the audit map stay inside its column space
  const LeafAssignment assign = apply(ens, x);
  const ProximityFactors f = build_factors(ens, assign, scheme_original(3), audit);
  for (idx c : f.query_factor.col_idx) EXPECT_LT(c, audit.total_leaves);
}

TEST(AuditLeafMap, RefusesWildLeafIds) {
  Matrix x;
  Ensemble ens = blob_forest(50, 3, 79, &x);
  const idx total = LeafIndexMap::build(ens).total_leaves;
  for (TreeNode& nd : ens.trees[0].nodes)
    if (nd.is_leaf()) {
      nd.leaf_id = 2 * total + 5000;
      break;
    }
  EXPECT_THROW(audit_leaf_map(ens), std::invalid_argument);
}

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "treeprox/datasets.hpp"
#include "treeprox/forest.hpp"
#include "treeprox/serialize.hpp"

using namespace treeprox;

namespace {

Matrix identical_rows(idx n, idx p, double v) {
  Matrix m(n, p);
  for (idx i = 0; i < n; ++i)
    for (idx j = 0; j < p; ++j) m(i, j) = v;
  return m;
}

TrainConfig quick_config(idx trees, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.n_trees = trees;
  cfg.seed = seed;
  return cfg;
}

/// Nearest-centroid classifier, fit and scored on the same data. Used as an
/// independent sanity yardstick for the forest's OOB error.
double centroid_train_error(const Matrix& x, const std::vector<double>& y) {
  Matrix centroids(2, x.cols);
  idx counts[2] = {0, 0};
  for (idx i = 0; i < x.rows; ++i) {
    const idx c = static_cast<idx>(y[i]);
    for (idx f = 0; f < x.cols; ++f) centroids(c, f) += x(i, f);
    ++counts[c];
  }
  for (idx c = 0; c < 2; ++c)
    for (idx f = 0; f < x.cols; ++f) centroids(c, f) /= static_cast<double>(counts[c]);
  idx wrong = 0;
  for (idx i = 0; i < x.rows; ++i) {
    double d[2] = {0.0, 0.0};
    for (idx c = 0; c < 2; ++c)
      for (idx f = 0; f < x.cols; ++f) {
        const double diff = x(i, f) - centroids(c, f);
        d[c] += diff * diff;
      }
    const idx pred = d[0] <= d[1] ? 0 : 1;
    if (static_cast<double>(pred) != y[i]) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(x.rows);
}

}  // namespace

TEST(TrainForest, IdenticalRowsGiveSingleLeafTrees) {
  const Matrix x = identical_rows(4, 3, 1.5);
  const std::vector<double> y{0.0, 1.0, 0.0, 1.0};
  const Ensemble ens = train_forest(x, y, quick_config(3, 7));
  ASSERT_EQ(ens.n_trees(), 3);
  for (const Tree& t : ens.trees) {
    EXPECT_EQ(t.leaf_count, 1);
    EXPECT_EQ(t.nodes.size(), 1u);
    EXPECT_TRUE(t.nodes[0].is_leaf());
  }
}

TEST(TrainForest, TwoRowPerfectSplit) {
  Matrix x(2, 1);
  x(0, 0) = 0.0;
  x(1, 0) = 1.0;
  const std::vector<double> y{0.0, 1.0};
  TrainConfig cfg = quick_config(1, 0);
  cfg.bootstrap = false;
  cfg.mtry = 1;
  const Ensemble ens = train_forest(x, y, cfg);

  const Tree& t = ens.trees[0];
  ASSERT_EQ(t.nodes.size(), 3u);
  ASSERT_EQ(t.leaf_count, 2);
  const TreeNode& root = t.nodes[0];
  ASSERT_FALSE(root.is_leaf());
  EXPECT_EQ(root.feature, 0);
  EXPECT_GT(root.threshold, 0.0);
  EXPECT_LT(root.threshold, 1.0);

  double probe0[1] = {0.0};
  double probe1[1] = {1.0};
  EXPECT_NE(t.leaf_of(probe0), t.leaf_of(probe1));
  EXPECT_DOUBLE_EQ(t.predict(probe0), 0.0);
  EXPECT_DOUBLE_EQ(t.predict(probe1), 1.0);
}

TEST(TrainForest, LeafIdsAreDfsOrdered) {
  const Dataset ds = make_blobs(120, [] {
    BlobsConfig c;
    c.n_classes = 3;
    c.n_features = 4;
    c.seed = 11;
    return c;
  }());
  const Ensemble ens = train_forest(ds.X, ds.y, quick_config(5, 3));
  for (const Tree& t : ens.trees) {
    // walk the tree depth-first, left child first; leaf ids must appear in
    // visit order
    std::vector<idx> stack{0};
    idx expect_id = 0;
    while (!stack.empty()) {
      const idx n = stack.back();
      stack.pop_back();
      if (t.nodes[n].is_leaf()) {
        EXPECT_EQ(t.nodes[n].leaf_id, expect_id++);
      } else {
        stack.push_back(t.nodes[n].right);
        stack.push_back(t.nodes[n].left);
      }
    }
    EXPECT_EQ(expect_id, t.leaf_count);
  }
}

TEST(Apply, RoutingIsTotalAndDeterministic) {
  const Dataset ds = make_blobs(80, [] {
    BlobsConfig c;
    c.n_classes = 4;
    c.n_features = 5;
    c.seed = 21;
    return c;
  }());
  const Ensemble ens = train_forest(ds.X, ds.y, quick_config(10, 5));
  const LeafAssignment a = apply(ens, ds.X);
  const LeafAssignment b = apply(ens, ds.X, 2);
  ASSERT_EQ(a.n_rows, 80);
  ASSERT_EQ(a.n_trees, 10);
  EXPECT_EQ(a.leaf, b.leaf);
  for (idx i = 0; i < a.n_rows; ++i)
    for (idx t = 0; t < a.n_trees; ++t)
      EXPECT_LT(a.at(i, t), static_cast<std::uint32_t>(ens.trees[t].leaf_count));
}

TEST(Apply, PerfectSplitSeparatesProbes) {
  Matrix x(2, 1);
  x(0, 0) = 0.0;
  x(1, 0) = 1.0;
  TrainConfig cfg = quick_config(1, 0);
  cfg.bootstrap = false;
  const Ensemble ens = train_forest(x, {0.0, 1.0}, cfg);
  const LeafAssignment la = apply(ens, x);
  EXPECT_NE(la.at(0, 0), la.at(1, 0));
}

TEST(TrainForest, DeterministicAcrossRunsAndThreadCounts) {
  const Dataset ds = make_blobs(150, [] {
    BlobsConfig c;
    c.n_classes = 5;
    c.n_features = 4;
    c.seed = 31;
    return c;
  }());
  TrainConfig cfg = quick_config(12, 99);
  const std::string once = serialize_ensemble(train_forest(ds.X, ds.y, cfg, 1));
  const std::string twice = serialize_ensemble(train_forest(ds.X, ds.y, cfg, 1));
  const std::string threaded = serialize_ensemble(train_forest(ds.X, ds.y, cfg, 3));
  EXPECT_EQ(once, twice);
  EXPECT_EQ(once, threaded);
}

TEST(TrainForest, SeedChangesTheForest) {
  const Dataset ds = make_blobs(100, [] {
    BlobsConfig c;
    c.seed = 41;
    return c;
  }());
  const std::string a = serialize_ensemble(train_forest(ds.X, ds.y, quick_config(5, 1)));
  const std::string b = serialize_ensemble(train_forest(ds.X, ds.y, quick_config(5, 2)));
  EXPECT_NE(a, b);
}

TEST(TrainForest, OobErrorBeatsLooseBoundOnSeparableData) {
  const Dataset ds = make_two_gaussians(200, 4, 3.0, 17);
  const double yardstick = centroid_train_error(ds.X, ds.y);
  EXPECT_LE(yardstick, 0.12);  // separation 3 leaves ~7% Bayes error
  const Ensemble ens = train_forest(ds.X, ds.y, quick_config(50, 17));
  const double oob = oob_classification_error(ens, ds.X, ds.y);
  EXPECT_LE(oob, 0.15);
}

TEST(TrainForest, RegressionLeavesPredictExactMeansOnDistinctPoints) {
  Matrix x(8, 1);
  std::vector<double> y(8);
  for (idx i = 0; i < 8; ++i) {
    x(i, 0) = static_cast<double>(i);
    y[i] = 3.0 * static_cast<double>(i) + 1.0;
  }
  TrainConfig cfg = quick_config(1, 0);
  cfg.criterion = Criterion::variance;
  cfg.bootstrap = false;
  cfg.mtry = 1;
  const Ensemble ens = train_forest(x, y, cfg);
  EXPECT_EQ(ens.trees[0].leaf_count, 8);  // fully grown: one sample per leaf
  for (idx i = 0; i < 8; ++i) EXPECT_DOUBLE_EQ(ens.trees[0].predict(x.row(i)), y[i]);
}

TEST(TrainForest, MaxDepthCapsLeafCount) {
  const Dataset ds = make_blobs(200, [] {
    BlobsConfig c;
    c.seed = 51;
    return c;
  }());
  TrainConfig cfg = quick_config(6, 9);
  cfg.max_depth = 2;
  const Ensemble ens = train_forest(ds.X, ds.y, cfg);
  for (const Tree& t : ens.trees) EXPECT_LE(t.leaf_count, 4);
}

TEST(TrainForest, MinSamplesLeafRespectedWithoutBootstrap) {
  const Dataset ds = make_blobs(150, [] {
    BlobsConfig c;
    c.seed = 61;
    return c;
  }());
  TrainConfig cfg = quick_config(4, 13);
  cfg.bootstrap = false;
  cfg.min_samples_leaf = 10;
  const Ensemble ens = train_forest(ds.X, ds.y, cfg);
  const LeafMass lm = compute_leaf_mass(ens, apply(ens, ds.X));
  for (idx t = 0; t < ens.n_trees(); ++t)
    for (std::uint32_t m : lm.mass[t]) EXPECT_GE(m, 10u);
}

TEST(TrainForest, LeafExhaustivenessOverBagSamples) {
  const Dataset ds = make_blobs(90, [] {
    BlobsConfig c;
    c.seed = 71;
    return c;
  }());
  const Ensemble ens = train_forest(ds.X, ds.y, quick_config(8, 23));
  const LeafMass lm = compute_leaf_mass(ens, apply(ens, ds.X));
  for (idx t = 0; t < ens.n_trees(); ++t) {
    std::uint64_t mass_total = 0;
    for (std::uint32_t m : lm.mass[t]) mass_total += m;
    EXPECT_EQ(mass_total, 90u);  // bootstrap draws have exactly N entries
  }
}

TEST(TrainForest, InputValidation) {
  const Matrix one_row(1, 2);
  EXPECT_THROW(train_forest(one_row, {0.0}, quick_config(1, 0)), std::invalid_argument);

  Matrix x(4, 2);
  const std::vector<double> y{0.0, 1.0, 0.0, 1.0};
  TrainConfig bad_mtry = quick_config(1, 0);
  bad_mtry.mtry = 3;
  EXPECT_THROW(train_forest(x, y, bad_mtry), std::invalid_argument);

  TrainConfig no_trees = quick_config(0, 0);
  EXPECT_THROW(train_forest(x, y, no_trees), std::invalid_argument);

  TrainConfig bad_leaf = quick_config(1, 0);
  bad_leaf.min_samples_leaf = 0;
  EXPECT_THROW(train_forest(x, y, bad_leaf), std::invalid_argument);

  Matrix nan_x = x;
  nan_x(0, 0) = std::nan("");
  EXPECT_THROW(train_forest(nan_x, y, quick_config(1, 0)), std::invalid_argument);

  EXPECT_THROW(train_forest(x, {0.0, 1.0}, quick_config(1, 0)), std::invalid_argument);

  const Ensemble ens = train_forest(x, y, quick_config(2, 0));
  Matrix wrong_cols(4, 3);
  EXPECT_THROW(apply(ens, wrong_cols), std::invalid_argument);
}

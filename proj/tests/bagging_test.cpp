#include <gtest/gtest.h>

#include <vector>

#include "treeprox/bagging.hpp"
#include "treeprox/forest.hpp"
#include "treeprox/rng.hpp"

using namespace treeprox;

namespace {

/// Minimal ensemble scaffolding for exercising leaf mass directly: trees are
/// given by leaf count only, with routing supplied through a hand-written
/// LeafAssignment.
Ensemble stub_ensemble(idx n_train, const std::vector<idx>& leaf_counts, BaggingRecord bag) {
  Ensemble ens;
  ens.n_train = n_train;
  ens.n_features = 1;
  for (idx lc : leaf_counts) {
    Tree t;
    t.leaf_count = lc;
    if (lc == 1) {
      TreeNode leaf;
      leaf.leaf_id = 0;
      t.nodes.push_back(leaf);
    } else {
      TreeNode root;
      root.feature = 0;
      root.threshold = 0.5;
      root.left = 1;
      root.right = 2;
      TreeNode l, r;
      l.leaf_id = 0;
      r.leaf_id = 1;
      t.nodes = {root, l, r};
    }
    ens.trees.push_back(t);
  }
  ens.tree_weights.assign(ens.trees.size(), 1.0);
  ens.bagging = std::move(bag);
  return ens;
}

LeafAssignment stub_assignment(idx n_rows, idx n_trees, const std::vector<std::uint32_t>& leaf) {
  LeafAssignment la;
  la.n_rows = n_rows;
  la.n_trees = n_trees;
  la.leaf = leaf;
  return la;
}

}  // namespace

TEST(RecordBagging, TalliesMultiplicityAndOob) {
  const BaggingRecord rec = record_bagging(3, true, {{0, 0, 2}});
  ASSERT_EQ(rec.n_samples, 3);
  ASSERT_EQ(rec.n_trees, 1);
  EXPECT_EQ(rec.mult(0, 0), 2u);
  EXPECT_EQ(rec.mult(1, 0), 0u);
  EXPECT_EQ(rec.mult(2, 0), 1u);
  EXPECT_FALSE(rec.is_oob(0, 0));
  EXPECT_TRUE(rec.is_oob(1, 0));
  EXPECT_FALSE(rec.is_oob(2, 0));
  EXPECT_EQ(rec.oob_counts[0], 0);
  EXPECT_EQ(rec.oob_counts[1], 1);
  EXPECT_EQ(rec.oob_counts[2], 0);
  EXPECT_EQ(rec.never_oob_count, 2);
}

TEST(RecordBagging, WithoutBootstrapEverySampleIsInEveryBag) {
  const BaggingRecord rec = record_bagging(4, false, {{0, 1, 2, 3}, {0, 1, 2, 3}});
  for (idx j = 0; j < 4; ++j) {
    EXPECT_EQ(rec.oob_counts[j], 0);
    for (idx t = 0; t < 2; ++t) EXPECT_EQ(rec.mult(j, t), 1u);
  }
  EXPECT_EQ(rec.never_oob_count, 4);
}

TEST(RecordBagging, RejectsOutOfRangeSampleIndex) {
  EXPECT_THROW(record_bagging(3, true, {{0, 3}}), std::invalid_argument);
  EXPECT_THROW(record_bagging(3, true, {{-1}}), std::invalid_argument);
}

TEST(RecordBagging, OobFractionMatchesTheClassicRate) {
  const idx n = 1000, t_count = 100;
  Rng rng(2024);
  std::vector<std::vector<idx>> draws(t_count);
  for (idx t = 0; t < t_count; ++t) {
    draws[t].reserve(n);
    for (idx j = 0; j < n; ++j)
      draws[t].push_back(static_cast<idx>(rng.bounded(static_cast<std::uint64_t>(n))));
  }
  const BaggingRecord rec = record_bagging(n, true, draws);
  double oob_pairs = 0;
  for (idx j = 0; j < n; ++j) oob_pairs += static_cast<double>(rec.oob_counts[j]);
  const double fraction = oob_pairs / static_cast<double>(n * t_count);
  EXPECT_NEAR(fraction, 0.368, 0.03);  // (1 - 1/N)^N for N = 1000
  EXPECT_EQ(rec.never_oob_count, 0);   // astronomically unlikely at T = 100
}

TEST(RecordBagging, RefreshSummariesTracksEdits) {
  BaggingRecord rec = record_bagging(2, true, {{0, 1}});
  EXPECT_EQ(rec.never_oob_count, 2);
  rec.multiplicity[0] = 0;  // sample 0 leaves tree 0's bag
  rec.refresh_summaries();
  EXPECT_EQ(rec.oob_counts[0], 1);
  EXPECT_EQ(rec.never_oob_count, 1);
}

TEST(LeafMass, SingleLeafAccumulatesTheWholeBag) {
  const Ensemble ens = stub_ensemble(3, {1}, record_bagging(3, true, {{0, 0, 2}}));
  const LeafAssignment la = stub_assignment(3, 1, {0, 0, 0});
  const LeafMass lm = compute_leaf_mass(ens, la);
  ASSERT_EQ(lm.mass.size(), 1u);
  ASSERT_EQ(lm.mass[0].size(), 1u);
  EXPECT_EQ(lm.at(0, 0), 3u);
}

TEST(LeafMass, TwoLeavesWithoutBootstrap) {
  const Ensemble ens = stub_ensemble(2, {2}, record_bagging(2, false, {{0, 1}}));
  const LeafAssignment la = stub_assignment(2, 1, {0, 1});
  const LeafMass lm = compute_leaf_mass(ens, la);
  EXPECT_EQ(lm.at(0, 0), 1u);
  EXPECT_EQ(lm.at(0, 1), 1u);
}

TEST(LeafMass, PerTreeMassSumsToBagSize) {
  // two trees over 5 samples, arbitrary draws and routings
  const BaggingRecord bag = record_bagging(5, true, {{0, 1, 1, 4, 3}, {2, 2, 2, 0, 4}});
  const Ensemble ens = stub_ensemble(5, {2, 2}, bag);
  const LeafAssignment la = stub_assignment(5, 2,
                                            {0, 1,   // sample 0
                                             1, 0,   // sample 1
                                             0, 0,   // sample 2
                                             1, 1,   // sample 3
                                             0, 1}); // sample 4
  const LeafMass lm = compute_leaf_mass(ens, la);
  for (idx t = 0; t < 2; ++t) {
    std::uint64_t total = 0;
    for (std::uint32_t m : lm.mass[t]) total += m;
    EXPECT_EQ(total, 5u);
  }
  EXPECT_EQ(lm.at(0, 0), 2u);  // samples 0 (x1) and 4 (x1); sample 2 drew 0 times
  EXPECT_EQ(lm.at(0, 1), 3u);  // sample 1 twice, sample 3 once
}

TEST(LeafMass, RejectsEmptyLeaves) {
  // leaf 1 of the only tree receives no bag mass
  const Ensemble ens = stub_ensemble(2, {2}, record_bagging(2, false, {{0, 1}}));
  const LeafAssignment la = stub_assignment(2, 1, {0, 0});
  EXPECT_THROW(compute_leaf_mass(ens, la), std::invalid_argument);
}

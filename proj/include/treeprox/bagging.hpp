#pragma once

#include <cstdint>
#include <vector>

#include "treeprox/common.hpp"

namespace treeprox {

/// Which training sample entered which tree's bag, and how many times.
/// Multiplicity 0 under bootstrap means the sample is out-of-bag for that
/// tree. Without bootstrap every sample appears once in every tree.
struct BaggingRecord {
  bool bootstrap = true;
  idx n_samples = 0;
  idx n_trees = 0;
  std::vector<std::uint32_t> multiplicity;  // row-major (sample, tree)
  std::vector<idx> oob_counts;              // per sample: trees where it is OOB
  idx never_oob_count = 0;

  std::uint32_t mult(idx sample, idx tree) const {
    return multiplicity[static_cast<std::size_t>(sample) * n_trees + tree];
  }

  bool is_oob(idx sample, idx tree) const { return mult(sample, tree) == 0; }

  /// Recompute the OOB summaries from the multiplicity table.
  void refresh_summaries() {
    oob_counts.assign(static_cast<std::size_t>(n_samples), 0);
    never_oob_count = 0;
    for (idx j = 0; j < n_samples; ++j) {
      idx c = 0;
      for (idx t = 0; t < n_trees; ++t)
        if (is_oob(j, t)) ++c;
      oob_counts[j] = c;
      if (c == 0) ++never_oob_count;
    }
  }
};

/// Tally per-tree draws into a multiplicity table. Each draw lists the
/// sample indices that entered one tree's bag, repeats included.
inline BaggingRecord record_bagging(idx n_samples, bool bootstrap,
                                    const std::vector<std::vector<idx>>& draws) {
  BaggingRecord rec;
  rec.bootstrap = bootstrap;
  rec.n_samples = n_samples;
  rec.n_trees = static_cast<idx>(draws.size());
  rec.multiplicity.assign(static_cast<std::size_t>(n_samples) * rec.n_trees, 0);
  for (idx t = 0; t < rec.n_trees; ++t) {
    for (idx j : draws[t]) {
      check(j >= 0 && j < n_samples, "record_bagging: sample index out of range");
      rec.multiplicity[static_cast<std::size_t>(j) * rec.n_trees + t]++;
    }
  }
  rec.refresh_summaries();
  return rec;
}

/// In-bag sample mass per leaf: mass[t][l] is the multiplicity-weighted
/// count of training samples whose routing lands in leaf l of tree t.
struct LeafMass {
  std::vector<std::vector<std::uint32_t>> mass;  // [tree][local leaf id]

  std::uint32_t at(idx tree, idx leaf) const {
    return mass[static_cast<std::size_t>(tree)][static_cast<std::size_t>(leaf)];
  }
};

}  // namespace treeprox

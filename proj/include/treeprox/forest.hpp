#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "treeprox/bagging.hpp"
#include "treeprox/common.hpp"
#include "treeprox/matrix.hpp"
#include "treeprox/rng.hpp"
#include "treeprox/tree.hpp"

namespace treeprox {

enum class Criterion { gini, variance };

struct TrainConfig {
  idx n_trees = 100;
  idx max_depth = 0;         // 0 means unlimited
  idx min_samples_leaf = 1;
  idx mtry = 0;              // 0: ceil(sqrt(p)) for gini, ceil(p/3) for variance
  Criterion criterion = Criterion::gini;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

struct Ensemble {
  std::vector<Tree> trees;
  idx n_train = 0;
  idx n_features = 0;
  std::vector<double> tree_weights;  // consumed by the boosted-weight scheme
  BaggingRecord bagging;
  std::uint64_t training_seed = 0;

  idx n_trees() const { return static_cast<idx>(trees.size()); }
};

/// Leaf id for every (row, tree) pair, row-major.
struct LeafAssignment {
  idx n_rows = 0;
  idx n_trees = 0;
  std::vector<std::uint32_t> leaf;

  std::uint32_t at(idx row, idx tree) const {
    return leaf[static_cast<std::size_t>(row) * n_trees + tree];
  }

  const std::uint32_t* row(idx r) const {
    return leaf.data() + static_cast<std::size_t>(r) * n_trees;
  }
};

namespace detail {

/// Grows one CART tree over a bag of samples. Sample positions (indices
/// into the bag, so bootstrap repeats stay distinct) are kept presorted per
/// feature; each split stably partitions every per-feature order, which
/// keeps node slices sorted without re-sorting.
class TreeTrainer {
 public:
  TreeTrainer(const Matrix& X, const std::vector<double>& y,
              const std::vector<std::int32_t>& cls, idx n_classes, const TrainConfig& cfg,
              idx mtry)
      : X_(X), y_(y), cls_(cls), n_classes_(n_classes), cfg_(cfg), mtry_(mtry) {}

  Tree grow(const std::vector<idx>& draw, Rng& rng) {
    const idx n = static_cast<idx>(draw.size());
    const idx p = X_.cols;
    draw_ = &draw;

    order_.assign(static_cast<std::size_t>(p), {});
    for (idx f = 0; f < p; ++f) {
      std::vector<std::int32_t>& ord = order_[f];
      ord.resize(static_cast<std::size_t>(n));
      for (idx i = 0; i < n; ++i) ord[i] = static_cast<std::int32_t>(i);
      std::sort(ord.begin(), ord.end(), [&](std::int32_t a, std::int32_t b) {
        const double va = value(a, f), vb = value(b, f);
        return va < vb || (va == vb && a < b);
      });
    }
    mask_.assign(static_cast<std::size_t>(n), 0);
    buffer_.resize(static_cast<std::size_t>(n));
    if (gini()) {
      count_node_.assign(static_cast<std::size_t>(n_classes_), 0);
      count_left_.assign(static_cast<std::size_t>(n_classes_), 0);
      count_right_.assign(static_cast<std::size_t>(n_classes_), 0);
    }
    feat_perm_.resize(static_cast<std::size_t>(p));
    for (idx f = 0; f < p; ++f) feat_perm_[f] = static_cast<std::int32_t>(f);

    Tree tree;
    tree.nodes.push_back(TreeNode{});
    struct Frame {
      idx node, begin, end, depth;
    };
    std::vector<Frame> stack;
    stack.push_back({0, 0, n, 0});
    while (!stack.empty()) {
      const Frame fr = stack.back();
      stack.pop_back();
      const idx m = fr.end - fr.begin;

      double parent_score = 0.0;
      bool pure = false;
      if (gini()) {
        std::fill(count_node_.begin(), count_node_.end(), 0);
        std::int64_t max_count = 0;
        for (idx i = fr.begin; i < fr.end; ++i) {
          const std::int64_t c = ++count_node_[cls_[(*draw_)[order_[0][i]]]];
          if (c > max_count) max_count = c;
        }
        pure = (max_count == m);
        std::int64_t sq = 0;
        for (std::int64_t c : count_node_) sq += c * c;
        node_sq_ = sq;
        parent_score = static_cast<double>(sq) / static_cast<double>(m);
      } else {
        double sum = 0.0, lo = y_[(*draw_)[order_[0][fr.begin]]], hi = lo;
        for (idx i = fr.begin; i < fr.end; ++i) {
          const double v = y_[(*draw_)[order_[0][i]]];
          sum += v;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        pure = (lo == hi);
        node_sum_ = sum;
        parent_score = sum * sum / static_cast<double>(m);
      }

      const bool depth_capped = cfg_.max_depth > 0 && fr.depth >= cfg_.max_depth;
      if (pure || depth_capped || m < 2 * cfg_.min_samples_leaf) {
        finish_leaf(tree, fr.node, fr.begin, fr.end);
        continue;
      }

      const Split best = find_split(fr.begin, fr.end, parent_score, rng);
      if (best.feature < 0) {
        finish_leaf(tree, fr.node, fr.begin, fr.end);
        continue;
      }

      apply_split(best, fr.begin, fr.end);
      const idx left = static_cast<idx>(tree.nodes.size());
      tree.nodes.push_back(TreeNode{});
      tree.nodes.push_back(TreeNode{});
      TreeNode& nd = tree.nodes[fr.node];
      nd.feature = best.feature;
      nd.threshold = best.threshold;
      nd.left = left;
      nd.right = left + 1;
      stack.push_back({left + 1, fr.begin + best.n_left, fr.end, fr.depth + 1});
      stack.push_back({left, fr.begin, fr.begin + best.n_left, fr.depth + 1});
    }
    return tree;
  }

 private:
  struct Split {
    double score = 0.0;
    idx feature = -1;
    double threshold = 0.0;
    idx n_left = 0;
  };

  bool gini() const { return cfg_.criterion == Criterion::gini; }

  double value(idx pos, idx f) const { return X_((*draw_)[pos], f); }

  /// Uses the node statistics (count_node_ / node_sum_) computed for the
  /// current frame.
  void finish_leaf(Tree& tree, idx node, idx begin, idx end) {
    TreeNode& nd = tree.nodes[node];
    nd.leaf_id = tree.leaf_count++;
    if (gini()) {
      idx best_c = 0;
      for (idx c = 1; c < n_classes_; ++c)
        if (count_node_[c] > count_node_[best_c]) best_c = c;  // tie keeps smaller label
      nd.value = (*class_labels_)[best_c];
    } else {
      nd.value = node_sum_ / static_cast<double>(end - begin);
    }
  }

  /// Best (feature, threshold) over an mtry subset, scanning candidate
  /// features in ascending index and thresholds in ascending value, so on
  /// equal scores the earliest candidate wins.
  Split find_split(idx begin, idx end, double parent_score, Rng& rng) {
    const idx p = X_.cols;
    const idx m = end - begin;
    if (mtry_ < p) {
      for (idx i = 0; i < mtry_; ++i) {
        const idx j = i + static_cast<idx>(rng.bounded(static_cast<std::uint64_t>(p - i)));
        std::swap(feat_perm_[i], feat_perm_[j]);
      }
      std::sort(feat_perm_.begin(), feat_perm_.begin() + mtry_);
    }

    Split best;
    best.score = parent_score;  // require strict improvement
    for (idx fi = 0; fi < mtry_; ++fi) {
      const idx f = (mtry_ < p) ? feat_perm_[fi] : fi;
      const std::int32_t* ord = order_[f].data() + begin;
      if (gini()) {
        std::fill(count_left_.begin(), count_left_.end(), 0);
        std::copy(count_node_.begin(), count_node_.end(), count_right_.begin());
        std::int64_t sq_left = 0, sq_right = node_sq_;
        for (idx i = 0; i + 1 < m; ++i) {
          const std::int32_t c = cls_[(*draw_)[ord[i]]];
          sq_left += 2 * count_left_[c] + 1;
          count_left_[c]++;
          sq_right -= 2 * count_right_[c] - 1;
          count_right_[c]--;
          const idx n_left = i + 1;
          if (n_left < cfg_.min_samples_leaf) continue;
          if (m - n_left < cfg_.min_samples_leaf) break;
          const double v = value(ord[i], f), v_next = value(ord[i + 1], f);
          if (!(v < v_next)) continue;
          const double score = static_cast<double>(sq_left) / static_cast<double>(n_left) +
                               static_cast<double>(sq_right) / static_cast<double>(m - n_left);
          if (score > best.score)
            best = {score, f, midpoint(v, v_next), n_left};
        }
      } else {
        double sum_left = 0.0;
        for (idx i = 0; i + 1 < m; ++i) {
          sum_left += y_[(*draw_)[ord[i]]];
          const idx n_left = i + 1;
          if (n_left < cfg_.min_samples_leaf) continue;
          if (m - n_left < cfg_.min_samples_leaf) break;
          const double v = value(ord[i], f), v_next = value(ord[i + 1], f);
          if (!(v < v_next)) continue;
          const double sum_right = node_sum_ - sum_left;
          const double score = sum_left * sum_left / static_cast<double>(n_left) +
                               sum_right * sum_right / static_cast<double>(m - n_left);
          if (score > best.score)
            best = {score, f, midpoint(v, v_next), n_left};
        }
      }
    }
    return best;
  }

  /// Midpoint of two distinct values, pulled back to the left value if
  /// rounding would let the right value pass the `<= threshold` test.
  static double midpoint(double a, double b) {
    const double t = a + (b - a) / 2.0;
    return (t < b) ? t : a;
  }

  /// Stably partition every per-feature order so the chosen split's left
  /// samples occupy [begin, begin + n_left) in all of them.
  void apply_split(const Split& s, idx begin, idx end) {
    const std::int32_t* split_ord = order_[s.feature].data();
    for (idx i = begin; i < begin + s.n_left; ++i) mask_[split_ord[i]] = 1;
    for (idx i = begin + s.n_left; i < end; ++i) mask_[split_ord[i]] = 0;
    for (idx f = 0; f < X_.cols; ++f) {
      if (f == s.feature) continue;  // already partitioned: it is sorted by value
      std::int32_t* ord = order_[f].data();
      idx write = begin, spill = 0;
      for (idx i = begin; i < end; ++i) {
        const std::int32_t pos = ord[i];
        if (mask_[pos])
          ord[write++] = pos;
        else
          buffer_[spill++] = pos;
      }
      std::copy(buffer_.begin(), buffer_.begin() + spill, ord + write);
    }
  }

 public:
  const std::vector<double>* class_labels_ = nullptr;  // class id -> original label

 private:
  const Matrix& X_;
  const std::vector<double>& y_;
  const std::vector<std::int32_t>& cls_;
  idx n_classes_;
  const TrainConfig& cfg_;
  idx mtry_;

  const std::vector<idx>* draw_ = nullptr;
  std::vector<std::vector<std::int32_t>> order_;
  std::vector<std::uint8_t> mask_;
  std::vector<std::int32_t> buffer_;
  std::vector<std::int32_t> feat_perm_;
  std::vector<std::int64_t> count_node_, count_left_, count_right_;
  std::int64_t node_sq_ = 0;
  double node_sum_ = 0.0;
};

}  // namespace detail

inline Ensemble train_forest(const Matrix& X, const std::vector<double>& y,
                             const TrainConfig& cfg, int threads = 1) {
  const idx n = X.rows, p = X.cols;
  check(n >= 2, "train_forest: need at least two samples");
  check(p >= 1, "train_forest: need at least one feature");
  check(static_cast<idx>(y.size()) == n, "train_forest: label count mismatch");
  check(X.all_finite(), "train_forest: non-finite feature value");
  for (double v : y) check(std::isfinite(v), "train_forest: non-finite label");
  check(cfg.n_trees >= 1, "train_forest: n_trees must be positive");
  check(cfg.min_samples_leaf >= 1, "train_forest: min_samples_leaf must be positive");
  check(cfg.max_depth >= 0, "train_forest: max_depth must be non-negative");
  check(cfg.mtry >= 0 && cfg.mtry <= p, "train_forest: mtry out of range");

  idx mtry = cfg.mtry;
  if (mtry == 0) {
    mtry = (cfg.criterion == Criterion::gini)
               ? static_cast<idx>(std::ceil(std::sqrt(static_cast<double>(p))))
               : (p + 2) / 3;
    mtry = std::max<idx>(1, std::min(mtry, p));
  }

  // labels -> dense class ids (gini only)
  std::vector<double> class_labels;
  std::vector<std::int32_t> cls;
  idx n_classes = 0;
  if (cfg.criterion == Criterion::gini) {
    class_labels = y;
    std::sort(class_labels.begin(), class_labels.end());
    class_labels.erase(std::unique(class_labels.begin(), class_labels.end()),
                       class_labels.end());
    n_classes = static_cast<idx>(class_labels.size());
    cls.resize(static_cast<std::size_t>(n));
    for (idx i = 0; i < n; ++i)
      cls[i] = static_cast<std::int32_t>(
          std::lower_bound(class_labels.begin(), class_labels.end(), y[i]) -
          class_labels.begin());
  }

  Ensemble ens;
  ens.n_train = n;
  ens.n_features = p;
  ens.training_seed = cfg.seed;
  ens.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  ens.tree_weights.assign(static_cast<std::size_t>(cfg.n_trees), 1.0);
  std::vector<std::vector<idx>> draws(static_cast<std::size_t>(cfg.n_trees));

  parallel_for(0, cfg.n_trees, threads, [&](idx lo, idx hi) {
    detail::TreeTrainer trainer(X, y, cls, n_classes, cfg, mtry);
    trainer.class_labels_ = &class_labels;
    for (idx t = lo; t < hi; ++t) {
      Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(t));
      std::vector<idx>& draw = draws[t];
      draw.resize(static_cast<std::size_t>(n));
      if (cfg.bootstrap)
        for (idx i = 0; i < n; ++i)
          draw[i] = static_cast<idx>(rng.bounded(static_cast<std::uint64_t>(n)));
      else
        for (idx i = 0; i < n; ++i) draw[i] = i;
      ens.trees[t] = trainer.grow(draw, rng);
      ens.trees[t].validate();
    }
  });

  ens.bagging = record_bagging(n, cfg.bootstrap, draws);
  return ens;
}

inline LeafAssignment apply(const Ensemble& ens, const Matrix& X, int threads = 1) {
  check(X.cols == ens.n_features, "apply: feature count mismatch");
  check(X.all_finite(), "apply: non-finite feature value");
  const idx T = ens.n_trees();
  LeafAssignment la;
  la.n_rows = X.rows;
  la.n_trees = T;
  la.leaf.resize(static_cast<std::size_t>(X.rows) * T);
  parallel_for(0, X.rows, threads, [&](idx lo, idx hi) {
    for (idx i = lo; i < hi; ++i) {
      const double* row = X.row(i);
      std::uint32_t* out = la.leaf.data() + static_cast<std::size_t>(i) * T;
      for (idx t = 0; t < T; ++t)
        out[t] = static_cast<std::uint32_t>(ens.trees[t].leaf_of(row));
    }
  });
  return la;
}

/// Out-of-bag misclassification rate: majority vote over each sample's OOB
/// trees, ties to the smallest predicted label; samples that are never OOB
/// are left out of the denominator.
inline double oob_classification_error(const Ensemble& ens, const Matrix& X,
                                       const std::vector<double>& y) {
  check(X.rows == ens.n_train, "oob error: row count mismatch");
  check(static_cast<idx>(y.size()) == X.rows, "oob error: label count mismatch");
  check(X.cols == ens.n_features, "oob error: feature count mismatch");
  idx scored = 0, wrong = 0;
  const idx T = ens.n_trees();
  for (idx j = 0; j < X.rows; ++j) {
    std::map<double, idx> votes;
    for (idx t = 0; t < T; ++t)
      if (ens.bagging.is_oob(j, t)) votes[ens.trees[t].predict(X.row(j))]++;
    if (votes.empty()) continue;
    double winner = 0.0;
    idx best = -1;
    for (const auto& [label, count] : votes)
      if (count > best) {  // map order makes ties pick the smallest label
        best = count;
        winner = label;
      }
    ++scored;
    if (winner != y[j]) ++wrong;
  }
  check(scored > 0, "oob error: no out-of-bag samples");
  return static_cast<double>(wrong) / static_cast<double>(scored);
}

/// In-bag multiplicity mass per leaf, from the training-set assignment.
inline LeafMass compute_leaf_mass(const Ensemble& ens, const LeafAssignment& train_assign) {
  check(train_assign.n_rows == ens.n_train, "leaf mass: assignment row count mismatch");
  check(train_assign.n_trees == ens.n_trees(), "leaf mass: assignment tree count mismatch");
  const idx T = ens.n_trees();
  LeafMass lm;
  lm.mass.resize(static_cast<std::size_t>(T));
  for (idx t = 0; t < T; ++t)
    lm.mass[t].assign(static_cast<std::size_t>(ens.trees[t].leaf_count), 0);
  for (idx j = 0; j < ens.n_train; ++j) {
    const std::uint32_t* row = train_assign.row(j);
    for (idx t = 0; t < T; ++t) {
      const std::uint32_t leaf = row[t];
      check(leaf < lm.mass[t].size(), "leaf mass: leaf id out of range");
      lm.mass[t][leaf] += ens.bagging.mult(j, t);
    }
  }
  for (idx t = 0; t < T; ++t)
    for (std::uint32_t m : lm.mass[t]) check(m > 0, "leaf mass: empty leaf");
  return lm;
}

}  // namespace treeprox

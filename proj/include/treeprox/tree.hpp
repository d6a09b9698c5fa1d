#pragma once

#include <vector>

#include "treeprox/common.hpp"

namespace treeprox {

/// One node of a binary decision tree. Internal nodes test
/// `x[feature] <= threshold` (true goes left); leaves carry a dense
/// per-tree leaf id assigned in depth-first order and a prediction value.
struct TreeNode {
  idx feature = -1;
  double threshold = 0.0;
  idx left = -1;
  idx right = -1;
  idx leaf_id = -1;
  double value = 0.0;

  bool is_leaf() const { return left < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  idx leaf_count = 0;

  /// Node index of the leaf the row falls into.
  idx route(const double* x) const {
    idx n = 0;
    while (!nodes[n].is_leaf())
      n = (x[nodes[n].feature] <= nodes[n].threshold) ? nodes[n].left : nodes[n].right;
    return n;
  }

  idx leaf_of(const double* x) const { return nodes[route(x)].leaf_id; }

  double predict(const double* x) const { return nodes[route(x)].value; }

  /// Routing safety alone: children always point forward (so route()
  /// terminates) and leaf ids are usable as array offsets. Says nothing
  /// about the leaf-id table being well formed; audit loads stop here so a
  /// corrupted leaf table reaches the numeric cross-check instead of being
  /// rejected up front.
  void validate_structure() const {
    check(!nodes.empty(), "tree: no nodes");
    check(leaf_count >= 1, "tree: leaf count must be positive");
    for (idx n = 0; n < static_cast<idx>(nodes.size()); ++n) {
      const TreeNode& node = nodes[n];
      if (node.is_leaf()) {
        check(node.right < 0, "tree: half-linked node");
        check(node.leaf_id >= 0, "tree: negative leaf id");
        check(node.leaf_id <= (idx{1} << 31), "tree: leaf id implausibly large");
      } else {
        check(node.feature >= 0, "tree: split without feature");
        check(node.left > n && node.left < static_cast<idx>(nodes.size()),
              "tree: bad left child");
        check(node.right > n && node.right < static_cast<idx>(nodes.size()),
              "tree: bad right child");
        check(node.leaf_id < 0, "tree: split node with leaf id");
      }
    }
  }

  /// Full invariants: structure plus a dense leaf-id table — ids are
  /// exactly 0..leaf_count-1, each used once.
  void validate() const {
    validate_structure();
    idx leaves_seen = 0;
    for (const TreeNode& node : nodes)
      if (node.is_leaf()) {
        check(node.leaf_id < leaf_count, "tree: leaf id out of range");
        ++leaves_seen;
      }
    check(leaves_seen == leaf_count, "tree: leaf count mismatch");
    std::vector<bool> seen(static_cast<std::size_t>(leaf_count), false);
    for (const TreeNode& node : nodes)
      if (node.is_leaf()) {
        check(!seen[node.leaf_id], "tree: duplicate leaf id");
        seen[node.leaf_id] = true;
      }
  }
};

}  // namespace treeprox

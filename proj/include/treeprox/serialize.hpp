#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "treeprox/common.hpp"
#include "treeprox/forest.hpp"

namespace treeprox {

inline constexpr int kModelSchemaVersion = 1;

/// How much to trust a model file at load time. `full` enforces every tree
/// invariant and is the default everywhere a model is consumed as truth.
/// `routing_only` admits trees whose leaf-id table is broken as long as
/// routing them is memory-safe; the oracle-check command loads this way so
/// that such corruption shows up as a measured sparse-vs-naive divergence.
enum class ModelValidation { full, routing_only };

/// Ensemble -> versioned JSON document. nlohmann objects keep keys in
/// alphabetical order and dump through the shortest round-trip double
/// formatter, so equal ensembles serialize to equal bytes.
inline nlohmann::json ensemble_to_json(const Ensemble& ens) {
  nlohmann::json doc;
  doc["version"] = kModelSchemaVersion;
  doc["T"] = ens.n_trees();
  doc["N"] = ens.n_train;
  doc["p"] = ens.n_features;
  doc["seed"] = ens.training_seed;
  doc["tree_weights"] = ens.tree_weights;

  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : ens.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& nd : tree.nodes) {
      nlohmann::json j;
      if (nd.is_leaf()) {
        j["kind"] = "leaf";
        j["local_leaf_id"] = nd.leaf_id;
        j["value"] = nd.value;
      } else {
        j["kind"] = "split";
        j["feature"] = nd.feature;
        j["threshold"] = nd.threshold;
        j["left"] = nd.left;
        j["right"] = nd.right;
      }
      nodes.push_back(std::move(j));
    }
    trees.push_back({{"leaf_count", tree.leaf_count}, {"nodes", std::move(nodes)}});
  }
  doc["trees"] = std::move(trees);

  nlohmann::json mult = nlohmann::json::array();
  for (idx t = 0; t < ens.n_trees(); ++t) {
    nlohmann::json col = nlohmann::json::array();
    for (idx j = 0; j < ens.n_train; ++j) col.push_back(ens.bagging.mult(j, t));
    mult.push_back(std::move(col));
  }
  doc["bagging"] = {{"bootstrap", ens.bagging.bootstrap}, {"multiplicity", std::move(mult)}};
  return doc;
}

inline Ensemble ensemble_from_json(const nlohmann::json& doc,
                                   ModelValidation validation = ModelValidation::full) {
  if (!doc.is_object() || !doc.contains("version") || !doc["version"].is_number_integer())
    throw SchemaError("model: missing schema version");
  const int version = doc["version"].get<int>();
  if (version != kModelSchemaVersion)
    throw SchemaError("model: unsupported schema version " + std::to_string(version) +
                      " (expected " + std::to_string(kModelSchemaVersion) + ")");

  auto require = [&](const char* key) -> const nlohmann::json& {
    if (!doc.contains(key)) throw SchemaError(std::string("model: missing field ") + key);
    return doc[key];
  };

  Ensemble ens;
  const idx T = require("T").get<idx>();
  ens.n_train = require("N").get<idx>();
  ens.n_features = require("p").get<idx>();
  ens.training_seed = require("seed").get<std::uint64_t>();
  ens.tree_weights = require("tree_weights").get<std::vector<double>>();
  if (T < 1 || ens.n_train < 1 || ens.n_features < 1)
    throw SchemaError("model: non-positive dimension");
  if (static_cast<idx>(ens.tree_weights.size()) != T)
    throw SchemaError("model: tree_weights length mismatch");

  const nlohmann::json& trees = require("trees");
  if (!trees.is_array() || static_cast<idx>(trees.size()) != T)
    throw SchemaError("model: tree array length mismatch");
  ens.trees.reserve(static_cast<std::size_t>(T));
  for (const nlohmann::json& jt : trees) {
    Tree tree;
    tree.leaf_count = jt.at("leaf_count").get<idx>();
    for (const nlohmann::json& jn : jt.at("nodes")) {
      TreeNode nd;
      const std::string kind = jn.at("kind").get<std::string>();
      if (kind == "leaf") {
        nd.leaf_id = jn.at("local_leaf_id").get<idx>();
        nd.value = jn.at("value").get<double>();
      } else if (kind == "split") {
        nd.feature = jn.at("feature").get<idx>();
        nd.threshold = jn.at("threshold").get<double>();
        nd.left = jn.at("left").get<idx>();
        nd.right = jn.at("right").get<idx>();
      } else {
        throw SchemaError("model: unknown node kind " + kind);
      }
      tree.nodes.push_back(nd);
    }
    try {
      if (validation == ModelValidation::full)
        tree.validate();
      else
        tree.validate_structure();
      for (const TreeNode& nd : tree.nodes)
        if (!nd.is_leaf())
          check(nd.feature < ens.n_features, "model: split feature out of range");
    } catch (const std::invalid_argument& e) {
      throw SchemaError(std::string("model: ") + e.what());
    }
    ens.trees.push_back(std::move(tree));
  }

  const nlohmann::json& bag = require("bagging");
  BaggingRecord& rec = ens.bagging;
  rec.bootstrap = bag.at("bootstrap").get<bool>();
  rec.n_samples = ens.n_train;
  rec.n_trees = T;
  rec.multiplicity.assign(static_cast<std::size_t>(ens.n_train) * T, 0);
  const nlohmann::json& mult = bag.at("multiplicity");
  if (!mult.is_array() || static_cast<idx>(mult.size()) != T)
    throw SchemaError("model: multiplicity array length mismatch");
  for (idx t = 0; t < T; ++t) {
    const nlohmann::json& col = mult[static_cast<std::size_t>(t)];
    if (!col.is_array() || static_cast<idx>(col.size()) != ens.n_train)
      throw SchemaError("model: multiplicity column length mismatch");
    for (idx j = 0; j < ens.n_train; ++j)
      rec.multiplicity[static_cast<std::size_t>(j) * T + t] =
          col[static_cast<std::size_t>(j)].get<std::uint32_t>();
  }
  rec.refresh_summaries();
  return ens;
}

inline std::string serialize_ensemble(const Ensemble& ens) {
  return ensemble_to_json(ens).dump(1) + "\n";
}

inline void save_ensemble(const Ensemble& ens, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  check(os.good(), "cannot open for writing: " + path);
  os << serialize_ensemble(ens);
  os.flush();
  check(os.good(), "write failed: " + path);
}

inline Ensemble load_ensemble(const std::string& path,
                              ModelValidation validation = ModelValidation::full) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), "cannot open for reading: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(std::string("model: invalid JSON: ") + e.what());
  }
  try {
    return ensemble_from_json(doc, validation);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("model: malformed document: ") + e.what());
  }
}

}  // namespace treeprox

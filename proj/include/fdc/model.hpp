#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "fdc/cart.hpp"
#include "fdc/dataset.hpp"
#include "fdc/error.hpp"
#include "fdc/linear.hpp"
#include "fdc/predictor.hpp"

namespace fdc {

/// A fitted reference learner: Ols or Lasso (LinearModel) or Cart.
using BuiltinModel = std::variant<LinearModel, CartModel>;

inline const Predictor& as_predictor(const BuiltinModel& model) {
  return std::visit([](const auto& m) -> const Predictor& { return m; }, model);
}

inline std::string kind_name(const BuiltinModel& model) {
  if (const auto* lin = std::get_if<LinearModel>(&model)) {
    return lin->method() == LinearModel::Method::Ols ? "ols" : "lasso";
  }
  return "cart";
}

/// Per-feature usage read off the model structure (nonzero coefficient or
/// split feature).
inline std::vector<bool> structural_features_used(const BuiltinModel& model) {
  if (const auto* lin = std::get_if<LinearModel>(&model)) return lin->features_used();
  const auto& cart = std::get<CartModel>(model);
  std::vector<bool> used(cart.schema().size(), false);
  for (std::size_t j : cart.split_features()) used[j] = true;
  return used;
}

using Json = nlohmann::ordered_json;

inline Json schema_to_json(const Schema& schema) {
  Json out = Json::array();
  for (const auto& f : schema.features()) {
    Json entry = {{"name", f.name}, {"kind", to_string(f.kind.tag)}};
    if (f.kind.is_categorical()) entry["levels"] = f.kind.levels;
    out.push_back(std::move(entry));
  }
  return out;
}

namespace model_detail {

[[noreturn]] inline void malformed(const std::string& what) { throw ModelError(ModelErrc::MalformedJson, what); }

inline const Json& field(const Json& obj, const char* key) {
  if (!obj.is_object()) malformed(std::string("expected an object holding '") + key + "'");
  const auto it = obj.find(key);
  if (it == obj.end()) malformed(std::string("missing field '") + key + "'");
  return *it;
}

inline double number(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number()) malformed(std::string("field '") + key + "' is not a number");
  return v.get<double>();
}

inline std::string text(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_string()) malformed(std::string("field '") + key + "' is not a string");
  return v.get<std::string>();
}

inline std::size_t count(const Json& obj, const char* key) {
  const Json& v = field(obj, key);
  if (!v.is_number_unsigned()) malformed(std::string("field '") + key + "' is not a nonnegative integer");
  return v.get<std::size_t>();
}

inline std::size_t feature_index(const Schema& schema, const std::string& name) {
  const auto idx = schema.index_of(name);
  if (!idx) throw ModelError(ModelErrc::InvariantViolation, "unknown feature '" + name + "'");
  return *idx;
}

inline std::size_t level_index(const Schema& schema, std::size_t feature, const std::string& level) {
  const auto idx = schema[feature].kind.level_index(level);
  if (!idx) throw ModelError(ModelErrc::InvariantViolation, "unknown level '" + level + "' of '" + schema[feature].name + "'");
  return *idx;
}

}  // namespace model_detail

inline Schema schema_from_json(const Json& arr) {
  using namespace model_detail;
  if (!arr.is_array()) malformed("schema must be an array");
  std::vector<Feature> features;
  for (const auto& entry : arr) {
    Feature f{text(entry, "name"), FeatureKind::numeric()};
    const std::string kind = text(entry, "kind");
    if (kind == "categorical") {
      const Json& levels = field(entry, "levels");
      if (!levels.is_array()) malformed("levels must be an array");
      std::vector<std::string> names;
      for (const auto& l : levels) {
        if (!l.is_string()) malformed("level names must be strings");
        names.push_back(l.get<std::string>());
      }
      f.kind = FeatureKind::categorical(std::move(names));
    } else if (kind != "numeric") {
      malformed("unknown feature kind '" + kind + "'");
    }
    features.push_back(std::move(f));
  }
  try {
    return Schema(std::move(features));
  } catch (const DataError& e) {
    throw ModelError(ModelErrc::InvariantViolation, e.what());
  }
}

/// Canonical JSON for a fitted model:
///
///   {"kind": "ols" | "lasso" | "cart", "schema": [{"name", "kind", "levels"?}], ...}
///
/// ols/lasso add "intercept" and "terms": [{"feature", "level"?, "coefficient"}]
/// (lasso also "lambda"); cart adds "max_depth", "min_leaf" and "nodes" in
/// preorder, each either {"leaf": true, "value", "count"} or {"leaf": false,
/// "feature", "threshold" | "levels", "left", "right", "value", "count"}.
inline Json model_to_json(const BuiltinModel& model) {
  Json out;
  out["kind"] = kind_name(model);
  out["schema"] = schema_to_json(as_predictor(model).schema());
  if (const auto* lin = std::get_if<LinearModel>(&model)) {
    const Schema& schema = lin->schema();
    if (lin->method() == LinearModel::Method::Lasso) out["lambda"] = lin->lambda();
    out["intercept"] = lin->intercept();
    Json terms = Json::array();
    for (const auto& t : lin->terms()) {
      Json term = {{"feature", schema[t.feature].name}};
      if (t.level) term["level"] = schema[t.feature].kind.levels[*t.level];
      term["coefficient"] = t.coefficient;
      terms.push_back(std::move(term));
    }
    out["terms"] = std::move(terms);
    return out;
  }
  const auto& cart = std::get<CartModel>(model);
  const Schema& schema = cart.schema();
  out["max_depth"] = cart.max_depth();
  out["min_leaf"] = cart.min_leaf();
  Json nodes = Json::array();
  for (const auto& n : cart.nodes()) {
    Json node;
    node["leaf"] = n.is_leaf();
    if (!n.is_leaf()) {
      const auto& f = schema[static_cast<std::size_t>(n.feature)];
      node["feature"] = f.name;
      if (f.kind.is_numeric()) {
        node["threshold"] = n.threshold;
      } else {
        Json levels = Json::array();
        for (std::size_t l : n.left_levels) levels.push_back(f.kind.levels[l]);
        node["levels"] = std::move(levels);
      }
      node["left"] = n.left;
      node["right"] = n.right;
    }
    node["value"] = n.value;
    node["count"] = n.count;
    nodes.push_back(std::move(node));
  }
  out["nodes"] = std::move(nodes);
  return out;
}

inline std::string serialize_model(const BuiltinModel& model) { return model_to_json(model).dump(2) + "\n"; }

/// Parses and validates a model. Throws ModelErrc::MalformedJson for syntax or
/// shape problems and ModelErrc::InvariantViolation for semantic ones (e.g. a
/// tree deeper than its declared max_depth).
inline BuiltinModel model_from_json(const Json& doc) {
  using namespace model_detail;
  const std::string kind = text(doc, "kind");
  const Schema schema = schema_from_json(field(doc, "schema"));
  if (kind == "ols" || kind == "lasso") {
    const double intercept = number(doc, "intercept");
    const double lambda = kind == "lasso" ? number(doc, "lambda") : 0.0;
    const Json& terms_json = field(doc, "terms");
    if (!terms_json.is_array()) malformed("terms must be an array");
    std::vector<LinearTerm> terms;
    for (const auto& t : terms_json) {
      LinearTerm term;
      term.feature = feature_index(schema, text(t, "feature"));
      if (t.contains("level")) term.level = level_index(schema, term.feature, text(t, "level"));
      term.coefficient = number(t, "coefficient");
      terms.push_back(term);
    }
    return LinearModel(schema, kind == "ols" ? LinearModel::Method::Ols : LinearModel::Method::Lasso, intercept,
                       std::move(terms), lambda);
  }
  if (kind == "cart") {
    const Json& max_depth_json = field(doc, "max_depth");
    if (!max_depth_json.is_number_integer()) malformed("max_depth must be an integer");
    const int max_depth = max_depth_json.get<int>();
    const std::size_t min_leaf = count(doc, "min_leaf");
    const Json& nodes_json = field(doc, "nodes");
    if (!nodes_json.is_array()) malformed("nodes must be an array");
    std::vector<CartNode> nodes;
    for (const auto& nj : nodes_json) {
      CartNode n;
      const Json& leaf = field(nj, "leaf");
      if (!leaf.is_boolean()) malformed("leaf must be a boolean");
      n.value = number(nj, "value");
      n.count = count(nj, "count");
      if (!leaf.get<bool>()) {
        const std::size_t j = feature_index(schema, text(nj, "feature"));
        n.feature = static_cast<int>(j);
        if (schema[j].kind.is_numeric()) {
          n.threshold = number(nj, "threshold");
        } else {
          const Json& levels = field(nj, "levels");
          if (!levels.is_array()) malformed("levels must be an array");
          for (const auto& l : levels) {
            if (!l.is_string()) malformed("level names must be strings");
            n.left_levels.push_back(level_index(schema, j, l.get<std::string>()));
          }
        }
        n.left = count(nj, "left");
        n.right = count(nj, "right");
      }
      nodes.push_back(std::move(n));
    }
    return CartModel(schema, std::move(nodes), max_depth, min_leaf);
  }
  malformed("unknown model kind '" + kind + "'");
}

inline BuiltinModel deserialize_model(std::string_view bytes) {
  Json doc;
  try {
    doc = Json::parse(bytes);
  } catch (const Json::parse_error& e) {
    throw ModelError(ModelErrc::MalformedJson, e.what());
  }
  return model_from_json(doc);
}

}  // namespace fdc

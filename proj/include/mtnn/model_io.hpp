#pragma once

// Model file: a JSON document
//
//   { "version": 1,
//     "objective": "binary:logistic",
//     "params": { "max_depth", "n_estimators", "eta", "gamma", "lambda", "min_child_weight" },
//     "base_score": 0.0,
//     "trees": [ {"feat": 5, "thresh": 96.0, "left": {...}, "right": {...}} | {"leaf": w}, ... ] }

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mtnn/errors.hpp"
#include "mtnn/gbdt.hpp"

namespace mtnn {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

using nlohmann::json;

inline json tree_to_json(const RegressionTree& tree, std::size_t at) {
  const auto& nd = tree.nodes()[at];
  if (nd.is_leaf()) return json{{"leaf", nd.weight}};
  return json{{"feat", nd.feature},
              {"thresh", nd.threshold},
              {"left", tree_to_json(tree, static_cast<std::size_t>(nd.left))},
              {"right", tree_to_json(tree, static_cast<std::size_t>(nd.right))}};
}

template <typename T>
T required(const json& obj, std::string_view key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing field '" + std::string(key) + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": field '" + std::string(key) + "' has the wrong type");
  }
}

inline int tree_from_json(const json& node, std::vector<TreeNode>& out, int depth, int max_depth,
                          const std::string& where) {
  if (!node.is_object()) throw ParseError(where + ": tree node must be an object");
  if (depth > max_depth) throw ParseError(where + ": tree deeper than max_depth");
  const int self = static_cast<int>(out.size());
  if (node.contains("leaf")) {
    const double w = required<double>(node, "leaf", where);
    if (!std::isfinite(w)) throw ParseError(where + ": non-finite leaf weight");
    out.push_back(TreeNode{-1, 0.0, -1, -1, w});
    return self;
  }
  const int feat = required<int>(node, "feat", where);
  const double thresh = required<double>(node, "thresh", where);
  if (feat < 0 || feat >= static_cast<int>(kFeatureCount)) {
    throw ParseError(where + ": feature index " + std::to_string(feat) + " out of range");
  }
  if (!node.contains("left") || !node.contains("right")) {
    throw ParseError(where + ": split node needs both 'left' and 'right'");
  }
  out.push_back(TreeNode{feat, thresh, -1, -1, 0.0});
  const int l = tree_from_json(node.at("left"), out, depth + 1, max_depth, where + ".left");
  const int r = tree_from_json(node.at("right"), out, depth + 1, max_depth, where + ".right");
  out[static_cast<std::size_t>(self)].left = l;
  out[static_cast<std::size_t>(self)].right = r;
  return self;
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline std::string serialize_model(const GbdtModel& model) {
  using detail::json;
  json trees = json::array();
  for (const auto& t : model.trees) trees.push_back(detail::tree_to_json(t, 0));
  const json doc = {
      {"version", kModelFormatVersion},
      {"objective", std::string(to_string(model.objective))},
      {"params",
       {{"max_depth", model.params.max_depth},
        {"n_estimators", model.params.n_estimators},
        {"eta", model.params.eta},
        {"gamma", model.params.gamma},
        {"lambda", model.params.lambda},
        {"min_child_weight", model.params.min_child_weight}}},
      {"base_score", model.base_score},
      {"trees", std::move(trees)},
  };
  return doc.dump(2) + "\n";
}

inline GbdtModel deserialize_model(std::string_view text) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError("malformed model document", line, col);
  }
  if (!doc.is_object()) throw ParseError("model document must be a JSON object", 1, 1);

  const int version = detail::required<int>(doc, "version", "model");
  if (version != kModelFormatVersion) {
    throw ParseError("unsupported model version " + std::to_string(version));
  }
  GbdtModel model;
  if (doc.contains("objective")) {
    const auto obj = detail::required<std::string>(doc, "objective", "model");
    if (obj == to_string(Objective::Logistic)) {
      model.objective = Objective::Logistic;
    } else if (obj == to_string(Objective::SquaredError)) {
      model.objective = Objective::SquaredError;
    } else {
      throw ParseError("model: unknown objective '" + obj + "'");
    }
  }
  const auto params = doc.find("params");
  if (params == doc.end() || !params->is_object()) throw ParseError("model: missing object 'params'");
  model.params.max_depth = detail::required<int>(*params, "max_depth", "params");
  model.params.n_estimators = detail::required<int>(*params, "n_estimators", "params");
  model.params.eta = detail::required<double>(*params, "eta", "params");
  model.params.gamma = detail::required<double>(*params, "gamma", "params");
  model.params.lambda = detail::required<double>(*params, "lambda", "params");
  model.params.min_child_weight = detail::required<double>(*params, "min_child_weight", "params");
  try {
    model.params.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("params: ") + e.what());
  }
  model.base_score = detail::required<double>(doc, "base_score", "model");

  const auto trees = doc.find("trees");
  if (trees == doc.end() || !trees->is_array()) throw ParseError("model: missing array 'trees'");
  if (trees->size() > static_cast<std::size_t>(model.params.n_estimators)) {
    throw ParseError("model: more trees than n_estimators");
  }
  for (std::size_t i = 0; i < trees->size(); ++i) {
    std::vector<TreeNode> nodes;
    detail::tree_from_json((*trees)[i], nodes, 0, model.params.max_depth,
                           "trees[" + std::to_string(i) + "]");
    model.trees.emplace_back(std::move(nodes));
  }
  return model;
}

inline void save_model(const GbdtModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << serialize_model(model);
  if (!out.flush()) throw std::runtime_error("failed writing '" + path + "'");
}

inline GbdtModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace mtnn

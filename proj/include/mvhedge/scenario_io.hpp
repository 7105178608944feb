#ifndef MVHEDGE_SCENARIO_IO_HPP
#define MVHEDGE_SCENARIO_IO_HPP

// Scenario files.
//
// A scenario is a JSON document:
//
//   {
//     "version": 1,
//     "payoff": "call strike=10",          // optional payoff expression
//     "nodes": [
//       {"id": "root", "price": 10},
//       {"id": "up", "parent": "root", "prob": 0.6, "price": 11},
//       {"id": "down", "parent": "root", "prob": 0.4, "price": 9}
//     ]
//   }
//
// Terminal nodes may instead carry explicit "payoff" values; an expression and
// explicit values are mutually exclusive. Prices are scalars: vector prices
// (several assets) are rejected.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mvhedge/error.hpp"
#include "mvhedge/tree_market.hpp"

namespace mvhedge::io {

inline constexpr int kScenarioVersion = 1;

/// Error in a scenario file or payoff expression. `diagnostics` lists every
/// problem found (one entry for syntax errors).
class ScenarioError : public Error {
 public:
  ScenarioError(const std::string& what, std::vector<std::string> diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  explicit ScenarioError(const std::string& what) : Error(what), diagnostics_{what} {}

  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

struct PayoffSpec {
  enum class Kind { terminal_price, call, put, constant };
  Kind kind = Kind::terminal_price;
  double parameter = 0.0;  // strike for options, value for constants

  std::string to_string() const {
    // Shortest round-trip rendering of the parameter.
    const std::string number = nlohmann::json(parameter).dump();
    switch (kind) {
      case Kind::terminal_price:
        return "terminal_price";
      case Kind::call:
        return "call strike=" + number;
      case Kind::put:
        return "put strike=" + number;
      case Kind::constant:
        return "constant value=" + number;
    }
    return {};
  }

  double operator()(double price) const {
    switch (kind) {
      case Kind::terminal_price:
        return price;
      case Kind::call:
        return std::max(price - parameter, 0.0);
      case Kind::put:
        return std::max(parameter - price, 0.0);
      case Kind::constant:
        return parameter;
    }
    return 0.0;
  }
};

namespace detail {

inline double parse_number(const std::string& text, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v)) {
    throw ScenarioError("invalid number '" + text + "' in " + context);
  }
  return v;
}

inline double parse_keyword_argument(std::istringstream& in, const std::string& key, const std::string& expr) {
  std::string arg;
  if (!(in >> arg) || arg.rfind(key + "=", 0) != 0) {
    throw ScenarioError("payoff expression '" + expr + "' needs " + key + "=<number>");
  }
  std::string rest;
  if (in >> rest) throw ScenarioError("trailing text in payoff expression '" + expr + "'");
  return parse_number(arg.substr(key.size() + 1), "payoff expression '" + expr + "'");
}

}  // namespace detail

/// Parses "terminal_price", "call strike=<k>", "put strike=<k>" or "constant value=<c>".
inline PayoffSpec parse_payoff_expression(const std::string& expr) {
  std::istringstream in(expr);
  std::string head;
  in >> head;
  PayoffSpec spec;
  if (head == "terminal_price") {
    std::string rest;
    if (in >> rest) throw ScenarioError("trailing text in payoff expression '" + expr + "'");
    spec.kind = PayoffSpec::Kind::terminal_price;
  } else if (head == "call") {
    spec.kind = PayoffSpec::Kind::call;
    spec.parameter = detail::parse_keyword_argument(in, "strike", expr);
  } else if (head == "put") {
    spec.kind = PayoffSpec::Kind::put;
    spec.parameter = detail::parse_keyword_argument(in, "strike", expr);
  } else if (head == "constant") {
    spec.kind = PayoffSpec::Kind::constant;
    spec.parameter = detail::parse_keyword_argument(in, "value", expr);
  } else {
    throw ScenarioError("unknown payoff expression '" + expr + "'");
  }
  return spec;
}

inline AdaptedProcess apply_payoff(const ScenarioTree& tree, const PayoffSpec& spec) {
  AdaptedProcess h = tree.make_adapted();
  for (NodeIndex i : tree.terminals()) h[i] = spec(tree.price(i));
  return h;
}

struct ScenarioDocument {
  int version = kScenarioVersion;
  std::vector<NodeRecord> records;
  std::optional<PayoffSpec> payoff_expression;
};

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

inline double require_number(const nlohmann::json& node, const char* key, const std::string& where) {
  const auto& v = node.at(key);
  if (v.is_array()) {
    throw ScenarioError(where + ": field '" + key + "' is a vector; only single-asset scenarios are supported");
  }
  if (!v.is_number()) throw ScenarioError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

}  // namespace detail

/// Parses the document text without building or validating the tree.
inline ScenarioDocument parse_scenario_document(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, column] = detail::line_column(text, e.byte);
    std::string msg = e.what();
    if (auto pos = msg.find("parse error"); pos != std::string::npos) msg = msg.substr(pos);
    throw ScenarioError("syntax error at line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                        msg);
  }
  if (!doc.is_object()) throw ScenarioError("scenario must be a JSON object");

  ScenarioDocument out;
  for (const auto& [key, value] : doc.items()) {
    if (key != "version" && key != "payoff" && key != "nodes") throw ScenarioError("unknown top-level field '" + key + "'");
  }
  if (!doc.contains("version") || !doc["version"].is_number_integer()) {
    throw ScenarioError("missing integer field 'version'");
  }
  out.version = doc["version"].get<int>();
  if (out.version != kScenarioVersion) {
    throw ScenarioError("unsupported scenario version " + std::to_string(out.version) + " (expected " +
                        std::to_string(kScenarioVersion) + ")");
  }
  if (doc.contains("payoff")) {
    if (!doc["payoff"].is_string()) throw ScenarioError("field 'payoff' must be an expression string");
    out.payoff_expression = parse_payoff_expression(doc["payoff"].get<std::string>());
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) throw ScenarioError("missing array field 'nodes'");

  std::size_t index = 0;
  for (const auto& node : doc["nodes"]) {
    const std::string where = "node #" + std::to_string(index++);
    if (!node.is_object()) throw ScenarioError(where + " must be an object");
    for (const auto& [key, value] : node.items()) {
      if (key != "id" && key != "parent" && key != "prob" && key != "price" && key != "payoff") {
        throw ScenarioError(where + ": unknown field '" + key + "'");
      }
    }
    NodeRecord r;
    if (!node.contains("id") || !node["id"].is_string()) throw ScenarioError(where + ": missing string field 'id'");
    r.id = node["id"].get<std::string>();
    const std::string named = where + " ('" + r.id + "')";
    if (node.contains("parent") && !node["parent"].is_null()) {
      if (!node["parent"].is_string()) throw ScenarioError(named + ": field 'parent' must be a string");
      r.parent = node["parent"].get<std::string>();
    }
    if (!node.contains("price")) throw ScenarioError(named + ": missing field 'price'");
    r.price = detail::require_number(node, "price", named);
    if (node.contains("prob")) {
      r.prob = detail::require_number(node, "prob", named);
    } else if (r.parent) {
      throw ScenarioError(named + ": missing field 'prob'");
    }
    if (node.contains("payoff") && !node["payoff"].is_null()) r.payoff = detail::require_number(node, "payoff", named);
    out.records.push_back(std::move(r));
  }
  return out;
}

struct Scenario {
  ScenarioTree tree;
  std::optional<AdaptedProcess> payoff;  // resolved on the terminals when the file or caller specifies one
  std::optional<PayoffSpec> expression;
  std::vector<std::string> warnings;
  bool arbitrage_free = true;
};

inline std::vector<std::string> describe(const std::vector<Violation>& violations) {
  std::vector<std::string> out;
  for (const auto& v : violations) out.push_back("node '" + v.node_id + "' [" + v.rule + "]: " + v.message);
  return out;
}

/// Builds and validates the tree and resolves the payoff. A payoff override
/// replaces both the file's expression and any explicit node payoffs.
inline Scenario load_scenario(ScenarioDocument doc, const std::optional<PayoffSpec>& payoff_override = std::nullopt) {
  const bool explicit_payoffs =
      std::any_of(doc.records.begin(), doc.records.end(), [](const NodeRecord& r) { return r.payoff.has_value(); });
  if (explicit_payoffs && doc.payoff_expression) {
    throw ScenarioError("payoff expression and explicit node payoffs are mutually exclusive");
  }
  if (payoff_override) {
    for (auto& r : doc.records) r.payoff.reset();
  }

  Scenario out;
  try {
    out.tree = ScenarioTree(std::move(doc.records));
  } catch (const TreeStructureError& e) {
    throw ScenarioError(std::string("invalid tree: ") + e.what());
  }
  if (auto violations = validate_tree(out.tree); !violations.empty()) {
    auto lines = describe(violations);
    std::string msg = "invalid tree:";
    for (const auto& l : lines) msg += "\n  " + l;
    throw ScenarioError(msg, std::move(lines));
  }

  out.expression = payoff_override ? payoff_override : doc.payoff_expression;
  if (out.expression) {
    out.payoff = apply_payoff(out.tree, *out.expression);
  } else if (explicit_payoffs) {
    out.payoff = out.tree.make_adapted();
    for (NodeIndex i : out.tree.terminals()) {
      const auto& p = out.tree.node(i).payoff;
      if (!p) throw ScenarioError("terminal node '" + out.tree.node(i).id + "' has no payoff");
      (*out.payoff)[i] = *p;
    }
  }

  out.arbitrage_free = no_arbitrage_check(out.tree);
  if (!out.arbitrage_free) out.warnings.push_back("arbitrage detected: some node has one-sided price moves");
  return out;
}

inline Scenario load_scenario_text(const std::string& text,
                                   const std::optional<PayoffSpec>& payoff_override = std::nullopt) {
  return load_scenario(parse_scenario_document(text), payoff_override);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline Scenario parse_scenario(const std::string& path,
                               const std::optional<PayoffSpec>& payoff_override = std::nullopt) {
  return load_scenario_text(read_file(path), payoff_override);
}

/// Canonical JSON rendering: nodes in (time, id) order, keys in fixed order.
inline std::string serialize_scenario(const ScenarioTree& tree,
                                      const std::optional<PayoffSpec>& expression = std::nullopt) {
  nlohmann::ordered_json doc;
  doc["version"] = kScenarioVersion;
  if (expression) doc["payoff"] = expression->to_string();
  doc["nodes"] = nlohmann::ordered_json::array();
  for (const auto& r : tree.records()) {
    nlohmann::ordered_json node;
    node["id"] = r.id;
    if (r.parent) node["parent"] = *r.parent;
    node["prob"] = r.prob;
    node["price"] = r.price;
    if (r.payoff && !expression) node["payoff"] = *r.payoff;
    doc["nodes"].push_back(std::move(node));
  }
  return doc.dump(2) + "\n";
}

}  // namespace mvhedge::io

#endif  // MVHEDGE_SCENARIO_IO_HPP

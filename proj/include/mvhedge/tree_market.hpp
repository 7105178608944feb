#ifndef MVHEDGE_TREE_MARKET_HPP
#define MVHEDGE_TREE_MARKET_HPP

// Finite scenario trees for a single risky asset in discrete time.
//
// A tree stores one price per node and the conditional probability of reaching
// each node from its parent. Nodes are kept in canonical (time, id) order, so
// a parent always precedes its children and a backward recursion is simply a
// loop over descending node indices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mvhedge/error.hpp"

namespace mvhedge {

using NodeIndex = std::size_t;

/// Marker for entries a process does not define (terminal entries of a
/// predictable control, nodes outside a requested subtree).
inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

/// Absolute tolerance on sums of conditional probabilities.
inline constexpr double kProbabilitySumTolerance = 1e-12;

/// Input record for one node. The root has no parent.
struct NodeRecord {
  std::string id;
  std::optional<std::string> parent;
  double prob = 1.0;
  double price = 0.0;
  std::optional<double> payoff;

  friend bool operator==(const NodeRecord&, const NodeRecord&) = default;
};

struct Node {
  std::string id;
  int time = 0;
  std::optional<NodeIndex> parent;
  double prob = 1.0;
  double price = 0.0;
  std::optional<double> payoff;
};

/// One real value per node, indexed by canonical node index. The tag keeps
/// adapted processes and predictable controls from being mixed up.
template <class Tag>
class NodeValues {
 public:
  NodeValues() = default;
  explicit NodeValues(std::size_t size, double fill = kUndefined) : values_(size, fill) {}

  double operator[](NodeIndex i) const { return values_[i]; }
  double& operator[](NodeIndex i) { return values_[i]; }

  std::size_t size() const { return values_.size(); }
  bool defined(NodeIndex i) const { return !std::isnan(values_[i]); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

 private:
  std::vector<double> values_;
};

struct AdaptedTag {};
struct PredictableTag {};

/// A process measurable at each node's own time (prices, values, wealth, densities).
using AdaptedProcess = NodeValues<AdaptedTag>;

/// A step quantity chosen at a non-terminal node and held over the next period.
/// Entry n is the position taken at node n; terminal entries are undefined.
using PredictableControl = NodeValues<PredictableTag>;

class ScenarioTree {
 public:
  ScenarioTree() = default;

  /// Builds the tree from unordered records. Throws TreeStructureError on
  /// duplicate or empty ids, unknown parents, no root or several roots, and
  /// nodes unreachable from the root. Probability, payoff and horizon rules
  /// are not enforced here; see validate_tree.
  explicit ScenarioTree(std::vector<NodeRecord> records) {
    if (records.empty()) throw TreeStructureError("tree has no nodes");

    std::map<std::string, std::size_t, std::less<>> by_id;
    std::optional<std::size_t> root;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (r.id.empty()) throw TreeStructureError("node with empty id");
      if (!by_id.emplace(r.id, i).second) throw TreeStructureError("duplicate node id '" + r.id + "'");
      if (!r.parent) {
        if (root) {
          throw TreeStructureError("several roots: '" + records[*root].id + "' and '" + r.id + "'");
        }
        root = i;
      }
    }
    if (!root) throw TreeStructureError("tree has no root");

    std::vector<std::vector<std::size_t>> kids(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (!records[i].parent) continue;
      auto it = by_id.find(*records[i].parent);
      if (it == by_id.end()) {
        throw TreeStructureError("node '" + records[i].id + "' has unknown parent '" + *records[i].parent + "'");
      }
      kids[it->second].push_back(i);
    }

    // Breadth-first from the root assigns times; anything left over sits on a cycle.
    std::vector<int> time(records.size(), -1);
    std::vector<std::size_t> frontier{*root};
    time[*root] = 0;
    std::size_t reached = 1;
    while (!frontier.empty()) {
      std::vector<std::size_t> next;
      for (auto p : frontier) {
        for (auto c : kids[p]) {
          time[c] = time[p] + 1;
          next.push_back(c);
          ++reached;
        }
      }
      frontier = std::move(next);
    }
    if (reached != records.size()) {
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (time[i] < 0) throw TreeStructureError("node '" + records[i].id + "' is not reachable from the root");
      }
    }

    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (time[a] != time[b]) return time[a] < time[b];
      return records[a].id < records[b].id;
    });
    std::vector<NodeIndex> canonical(records.size());
    for (std::size_t k = 0; k < order.size(); ++k) canonical[order[k]] = k;

    nodes_.resize(records.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      auto& r = records[order[k]];
      Node& n = nodes_[k];
      n.id = std::move(r.id);
      n.time = time[order[k]];
      n.prob = r.prob;
      n.price = r.price;
      n.payoff = r.payoff;
      if (r.parent) n.parent = canonical[by_id.find(*r.parent)->second];
      index_.emplace(n.id, k);
      horizon_ = std::max(horizon_, n.time);
    }

    child_offsets_.assign(nodes_.size() + 1, 0);
    for (const auto& n : nodes_) {
      if (n.parent) ++child_offsets_[*n.parent + 1];
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) child_offsets_[i + 1] += child_offsets_[i];
    child_list_.resize(nodes_.size() - 1);
    std::vector<std::size_t> fill(child_offsets_.begin(), child_offsets_.end() - 1);
    // Ascending k keeps each child list in canonical order.
    for (NodeIndex k = 1; k < nodes_.size(); ++k) child_list_[fill[*nodes_[k].parent]++] = k;

    path_prob_.resize(nodes_.size());
    path_prob_[0] = 1.0;
    for (NodeIndex k = 1; k < nodes_.size(); ++k) path_prob_[k] = path_prob_[*nodes_[k].parent] * nodes_[k].prob;
  }

  std::size_t size() const { return nodes_.size(); }
  NodeIndex root() const { return 0; }
  int horizon() const { return horizon_; }

  const Node& node(NodeIndex i) const { return nodes_[i]; }
  std::span<const Node> nodes() const { return nodes_; }
  double price(NodeIndex i) const { return nodes_[i].price; }

  std::span<const NodeIndex> children(NodeIndex i) const {
    return {child_list_.data() + child_offsets_[i], child_offsets_[i + 1] - child_offsets_[i]};
  }
  bool is_terminal(NodeIndex i) const { return child_offsets_[i] == child_offsets_[i + 1]; }

  /// Price change over the step into node c (c must not be the root).
  double price_step(NodeIndex c) const { return nodes_[c].price - nodes_[*nodes_[c].parent].price; }

  /// Unconditional probability of the path from the root to node i.
  double path_probability(NodeIndex i) const { return path_prob_[i]; }

  std::optional<NodeIndex> find(std::string_view id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  NodeIndex index_of(std::string_view id) const {
    auto i = find(id);
    if (!i) throw DomainError("unknown node id '" + std::string(id) + "'");
    return *i;
  }

  std::vector<NodeIndex> terminals() const {
    std::vector<NodeIndex> out;
    for (NodeIndex i = 0; i < size(); ++i) {
      if (is_terminal(i)) out.push_back(i);
    }
    return out;
  }

  /// Node `start` and all its descendants, in canonical order.
  std::vector<NodeIndex> subtree(NodeIndex start) const {
    std::vector<char> in(size(), 0);
    std::vector<NodeIndex> out{start};
    in[start] = 1;
    for (NodeIndex k = start + 1; k < size(); ++k) {
      if (nodes_[k].parent && in[*nodes_[k].parent]) {
        in[k] = 1;
        out.push_back(k);
      }
    }
    return out;
  }

  /// Records in canonical order; feeding them back to the constructor
  /// reproduces this tree.
  std::vector<NodeRecord> records() const {
    std::vector<NodeRecord> out;
    out.reserve(size());
    for (const auto& n : nodes_) {
      NodeRecord r{n.id, std::nullopt, n.prob, n.price, n.payoff};
      if (n.parent) r.parent = nodes_[*n.parent].id;
      out.push_back(std::move(r));
    }
    return out;
  }

  AdaptedProcess make_adapted(double fill = kUndefined) const { return AdaptedProcess(size(), fill); }

  /// A control with `fill` on non-terminal nodes and undefined terminal entries.
  PredictableControl make_control(double fill = 0.0) const {
    PredictableControl c(size());
    for (NodeIndex i = 0; i < size(); ++i) {
      if (!is_terminal(i)) c[i] = fill;
    }
    return c;
  }

 private:
  std::vector<Node> nodes_;
  std::map<std::string, NodeIndex, std::less<>> index_;
  std::vector<std::size_t> child_offsets_;
  std::vector<NodeIndex> child_list_;
  std::vector<double> path_prob_;
  int horizon_ = 0;
};

/// Σ over children c of prob(c)·f(c).
template <class F>
double expect_children(const ScenarioTree& tree, NodeIndex n, F&& f) {
  double sum = 0.0;
  for (NodeIndex c : tree.children(n)) sum += tree.node(c).prob * f(c);
  return sum;
}

/// Kind of one-step market at a non-terminal node.
enum class StepKind {
  riskless,   // every child has the parent's price
  two_sided,  // price moves up on some child and down on another
  arbitrage,  // nonzero moves, all of one sign
};

inline StepKind classify_step(const ScenarioTree& tree, NodeIndex n) {
  bool up = false;
  bool down = false;
  for (NodeIndex c : tree.children(n)) {
    double ds = tree.price_step(c);
    up = up || ds > 0.0;
    down = down || ds < 0.0;
  }
  if (up && down) return StepKind::two_sided;
  if (!up && !down) return StepKind::riskless;
  return StepKind::arbitrage;
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct Violation {
  std::string node_id;
  std::string rule;
  std::string message;
};

/// All violations of the tree invariants that construction does not already
/// enforce. Empty iff the tree is valid.
inline std::vector<Violation> validate_tree(const ScenarioTree& tree) {
  std::vector<Violation> out;
  if (tree.size() == 0) {
    out.push_back({"", "non-empty", "tree has no nodes"});
    return out;
  }
  const int horizon = tree.horizon();
  if (horizon < 1) {
    out.push_back({tree.node(0).id, "horizon", "horizon must be at least one period"});
  }
  if (tree.node(0).prob != 1.0) {
    out.push_back({tree.node(0).id, "root-probability", "root probability " + format_real(tree.node(0).prob) + " ≠ 1"});
  }
  for (NodeIndex i = 0; i < tree.size(); ++i) {
    const Node& n = tree.node(i);
    if (i != tree.root() && !(n.prob > 0.0 && n.prob <= 1.0)) {
      out.push_back({n.id, "probability-range", "probability " + format_real(n.prob) + " outside (0,1]"});
    }
    if (!std::isfinite(n.price)) {
      out.push_back({n.id, "finite-price", "price is not finite"});
    }
    if (tree.is_terminal(i)) {
      if (n.time != horizon) {
        out.push_back({n.id, "terminal-time",
                       "terminal node at time " + std::to_string(n.time) + " before horizon " + std::to_string(horizon)});
      }
      if (n.payoff && !std::isfinite(*n.payoff)) {
        out.push_back({n.id, "finite-payoff", "payoff is not finite"});
      }
    } else {
      if (n.payoff) {
        out.push_back({n.id, "payoff-placement", "payoff given on a non-terminal node"});
      }
      double sum = 0.0;
      for (NodeIndex c : tree.children(i)) sum += tree.node(c).prob;
      if (!(std::abs(sum - 1.0) <= kProbabilitySumTolerance)) {
        out.push_back({n.id, "probability-sum", "children probabilities sum " + format_real(sum) + " ≠ 1"});
      }
    }
  }
  return out;
}

/// Conditional expectations E[leaf values | n] filled in backwards from the terminals.
inline AdaptedProcess conditional_expectations_of_leaves(const ScenarioTree& tree, const AdaptedProcess& leaves) {
  AdaptedProcess out = tree.make_adapted();
  for (NodeIndex n = tree.size(); n-- > 0;) {
    out[n] = tree.is_terminal(n) ? leaves[n] : expect_children(tree, n, [&](NodeIndex c) { return out[c]; });
  }
  return out;
}

/// E[X | node] = Σ_c prob(c)·X(c) over the children of a non-terminal node.
inline double cond_exp(const ScenarioTree& tree, const AdaptedProcess& x, NodeIndex node) {
  if (tree.is_terminal(node)) {
    throw DomainError("no conditional expectation at terminal node '" + tree.node(node).id + "'");
  }
  return expect_children(tree, node, [&](NodeIndex c) { return x[c]; });
}

struct DoobDecomposition {
  PredictableControl drift;     // E[ΔS | n] at each non-terminal node n
  AdaptedProcess martingale;    // ΔS − drift(parent) on each non-root node; undefined at the root
};

inline DoobDecomposition doob_decomposition(const ScenarioTree& tree) {
  DoobDecomposition d{PredictableControl(tree.size()), tree.make_adapted()};
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (tree.is_terminal(n)) continue;
    const double drift = expect_children(tree, n, [&](NodeIndex c) { return tree.price_step(c); });
    d.drift[n] = drift;
    for (NodeIndex c : tree.children(n)) d.martingale[c] = tree.price_step(c) - drift;
  }
  return d;
}

/// Structure-condition quantities per step: λ = E[ΔS|F]/Var[ΔS|F],
/// the predictable quadratic variation increment Var[ΔS|F] and the
/// mean-variance tradeoff increment λ²·Var[ΔS|F].
struct MeanVarianceTradeoff {
  PredictableControl lambda;
  PredictableControl qv_increment;
  PredictableControl tradeoff_increment;
};

inline MeanVarianceTradeoff lambda_and_tradeoff(const ScenarioTree& tree) {
  MeanVarianceTradeoff out{PredictableControl(tree.size()), PredictableControl(tree.size()),
                           PredictableControl(tree.size())};
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (tree.is_terminal(n)) continue;
    const auto kids = tree.children(n);
    const double first = tree.price_step(kids.front());
    const bool constant_step =
        std::all_of(kids.begin(), kids.end(), [&](NodeIndex c) { return tree.price_step(c) == first; });
    if (constant_step) {
      if (first != 0.0) {
        throw ArbitrageError("arbitrage step: deterministic nonzero return at node '" + tree.node(n).id + "'");
      }
      // 0/0 convention on riskless steps.
      out.lambda[n] = 0.0;
      out.qv_increment[n] = 0.0;
      out.tradeoff_increment[n] = 0.0;
      continue;
    }
    const double mean = expect_children(tree, n, [&](NodeIndex c) { return tree.price_step(c); });
    const double var = expect_children(tree, n, [&](NodeIndex c) {
      const double dm = tree.price_step(c) - mean;
      return dm * dm;
    });
    out.lambda[n] = mean / var;
    out.qv_increment[n] = var;
    out.tradeoff_increment[n] = mean * mean / var;
  }
  return out;
}

/// Discrete stochastic exponential of γ·S started at `start`: 1 at start and
/// parent·(1 + γ(parent)·ΔS) below it. Undefined outside the subtree.
inline AdaptedProcess stochastic_exponential(const ScenarioTree& tree, const PredictableControl& gamma,
                                             NodeIndex start) {
  AdaptedProcess z = tree.make_adapted();
  z[start] = 1.0;
  for (NodeIndex c : tree.subtree(start)) {
    if (c == start) continue;
    const NodeIndex p = *tree.node(c).parent;
    z[c] = z[p] * (1.0 + gamma[p] * tree.price_step(c));
  }
  return z;
}

/// True iff every non-terminal node is riskless or has price moves of both
/// signs, i.e. an equivalent martingale measure exists.
inline bool no_arbitrage_check(const ScenarioTree& tree) {
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (!tree.is_terminal(n) && classify_step(tree, n) == StepKind::arbitrage) return false;
  }
  return true;
}

/// Terminal payoff H read from the node records; undefined off the terminals.
inline AdaptedProcess payoff_from_tree(const ScenarioTree& tree) {
  AdaptedProcess h = tree.make_adapted();
  for (NodeIndex i : tree.terminals()) {
    const auto& p = tree.node(i).payoff;
    if (!p) throw DomainError("terminal node '" + tree.node(i).id + "' has no payoff");
    h[i] = *p;
  }
  return h;
}

inline void require_terminal_payoff(const ScenarioTree& tree, const AdaptedProcess& payoff) {
  if (payoff.size() != tree.size()) throw DomainError("payoff process does not match the tree");
  for (NodeIndex i : tree.terminals()) {
    if (!payoff.defined(i)) throw DomainError("missing terminal payoff at node '" + tree.node(i).id + "'");
  }
}

inline void require_no_arbitrage(const ScenarioTree& tree) {
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (!tree.is_terminal(n) && classify_step(tree, n) == StepKind::arbitrage) {
      throw ArbitrageError("no equivalent martingale measure: one-sided price step at node '" + tree.node(n).id + "'");
    }
  }
}

}  // namespace mvhedge

#endif  // MVHEDGE_TREE_MARKET_HPP

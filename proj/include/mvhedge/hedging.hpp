#ifndef MVHEDGE_HEDGING_HPP
#define MVHEDGE_HEDGING_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mvhedge/coefficient_recursion.hpp"
#include "mvhedge/tree_market.hpp"

namespace mvhedge {

/// Absolute tolerance below zero that value_at still accepts (after clamping).
inline constexpr double kNegativeValueTolerance = 1e-10;

using WarningSink = std::vector<std::string>;

struct StrategyPath {
  PredictableControl theta;
  AdaptedProcess wealth;
};

/// Gains-process wealth X_c = X_n + θ(n)·ΔS_c started from `x` at `start`.
inline AdaptedProcess wealth_path(const ScenarioTree& tree, const PredictableControl& theta, double x,
                                  NodeIndex start) {
  AdaptedProcess wealth = tree.make_adapted();
  wealth[start] = x;
  for (NodeIndex c : tree.subtree(start)) {
    if (c == start) continue;
    const NodeIndex p = *tree.node(c).parent;
    wealth[c] = wealth[p] + theta[p] * tree.price_step(c);
  }
  return wealth;
}

/// Feedback strategy θ*(n) = b(n) - a(n)·X(n) and its wealth from capital x at `start`.
inline StrategyPath optimal_strategy(const ScenarioTree& tree, const CoefficientTriple& coeffs,
                                     const AdjustmentControls& controls, double x, NodeIndex start) {
  if (coeffs.v2.size() != tree.size() || controls.a.size() != tree.size()) {
    throw DomainError("coefficients were not computed on this tree");
  }
  StrategyPath out{PredictableControl(tree.size()), tree.make_adapted()};
  out.wealth[start] = x;
  for (NodeIndex n : tree.subtree(start)) {
    if (tree.is_terminal(n)) continue;
    const double theta = controls.b[n] - controls.a[n] * out.wealth[n];
    out.theta[n] = theta;
    for (NodeIndex c : tree.children(n)) out.wealth[c] = out.wealth[n] + theta * tree.price_step(c);
  }
  return out;
}

/// v0 - 2·v1·x + v2·x² without any sign handling.
inline double quadratic_value(const CoefficientTriple& coeffs, NodeIndex node, double x) {
  return coeffs.v0[node] - 2.0 * coeffs.v1[node] * x + coeffs.v2[node] * x * x;
}

/// Conditional minimal squared hedging error at `node` from capital x.
/// Results slightly below zero (rounding) are clamped to 0 with a warning;
/// the tolerance scales with the magnitude of the three terms.
inline double value_at(const CoefficientTriple& coeffs, NodeIndex node, double x, WarningSink* warnings = nullptr) {
  if (node >= coeffs.v2.size()) throw DomainError("node index out of range");
  const double value = quadratic_value(coeffs, node, x);
  if (value >= 0.0) return value;
  const double scale = std::max({1.0, std::abs(coeffs.v0[node]), std::abs(2.0 * coeffs.v1[node] * x),
                                 std::abs(coeffs.v2[node] * x * x)});
  if (value < -kNegativeValueTolerance * scale) {
    throw DomainError("negative value: coefficients inconsistent (" + format_real(value) + ")");
  }
  if (warnings) warnings->push_back("value " + format_real(value) + " clamped to 0");
  return 0.0;
}

struct DriftRow {
  NodeIndex node = 0;
  double wealth_star = 0.0;
  double drift_star = 0.0;   // E[V(X*_c)] - V(X*_n); zero along the optimum
  double wealth_probe = 0.0;
  double drift_probe = 0.0;  // nonnegative for every strategy
  bool star_violation = false;
  bool probe_violation = false;
  bool flagged = false;
};

struct OptimalityReport {
  std::vector<DriftRow> rows;
  double max_abs_drift_star = 0.0;
  double min_drift_probe = 0.0;
  bool star_passed = true;
  bool probe_passed = true;
  bool passed = true;
};

/// Martingale optimality certificate: along the wealth of θ* the value process
/// has zero one-step drift, along any other strategy it has nonnegative drift.
/// A node is flagged when |drift*| or -drift_probe exceeds
/// tolerance·(1 + |V_n|).
inline OptimalityReport verify_optimality(const ScenarioTree& tree, const CoefficientTriple& coeffs,
                                          const PredictableControl& theta_star,
                                          const PredictableControl& theta_probe, double x, NodeIndex start,
                                          double tolerance = 1e-10) {
  const auto star = wealth_path(tree, theta_star, x, start);
  const auto probe = wealth_path(tree, theta_probe, x, start);
  OptimalityReport report;
  bool first = true;
  for (NodeIndex n : tree.subtree(start)) {
    if (tree.is_terminal(n)) continue;
    DriftRow row;
    row.node = n;
    row.wealth_star = star[n];
    row.wealth_probe = probe[n];
    const double vs = quadratic_value(coeffs, n, star[n]);
    const double vp = quadratic_value(coeffs, n, probe[n]);
    row.drift_star = expect_children(tree, n, [&](NodeIndex c) { return quadratic_value(coeffs, c, star[c]); }) - vs;
    row.drift_probe =
        expect_children(tree, n, [&](NodeIndex c) { return quadratic_value(coeffs, c, probe[c]); }) - vp;
    row.star_violation = std::abs(row.drift_star) > tolerance * (1.0 + std::abs(vs));
    row.probe_violation = row.drift_probe < -tolerance * (1.0 + std::abs(vp));
    row.flagged = row.star_violation || row.probe_violation;
    report.star_passed = report.star_passed && !row.star_violation;
    report.probe_passed = report.probe_passed && !row.probe_violation;
    report.passed = report.passed && !row.flagged;
    report.max_abs_drift_star = std::max(report.max_abs_drift_star, std::abs(row.drift_star));
    report.min_drift_probe = first ? row.drift_probe : std::min(report.min_drift_probe, row.drift_probe);
    first = false;
    report.rows.push_back(row);
  }
  return report;
}

/// E[(H - x - Σ θ ΔS)^2] from the root, summed exactly over terminal paths.
inline double hedging_error(const ScenarioTree& tree, const AdaptedProcess& payoff, const PredictableControl& theta,
                            double x) {
  require_terminal_payoff(tree, payoff);
  const auto wealth = wealth_path(tree, theta, x, tree.root());
  double sum = 0.0;
  for (NodeIndex leaf : tree.terminals()) {
    const double r = payoff[leaf] - wealth[leaf];
    sum += tree.path_probability(leaf) * r * r;
  }
  return sum;
}

}  // namespace mvhedge

#endif  // MVHEDGE_HEDGING_HPP

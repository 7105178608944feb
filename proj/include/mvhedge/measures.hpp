#ifndef MVHEDGE_MEASURES_HPP
#define MVHEDGE_MEASURES_HPP

// Martingale-measure densities on scenario trees.
//
// Densities are signed in general: a density process z with z(root) = 1 and
// z·S a martingale defines a signed martingale measure, which is equivalent to
// P only when z > 0 on every node.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mvhedge/coefficient_recursion.hpp"
#include "mvhedge/tree_market.hpp"

namespace mvhedge {

/// |z| at or below this is treated as a zero of the density.
inline constexpr double kDensityZeroTolerance = 1e-12;

struct DensityProcess {
  AdaptedProcess z;
  bool is_signed = false;  // true iff z < 0 somewhere
};

inline bool has_negative_value(const AdaptedProcess& z) {
  return std::any_of(z.values().begin(), z.values().end(), [](double v) { return v < 0.0; });
}

/// Density of the minimal signed martingale measure, the running product of
/// (1 - λ ΔM) with λ and ΔM from the structure condition.
inline DensityProcess minimal_martingale_density(const ScenarioTree& tree) {
  require_no_arbitrage(tree);
  const auto mvt = lambda_and_tradeoff(tree);
  const auto doob = doob_decomposition(tree);
  DensityProcess out{tree.make_adapted(), false};
  out.z[tree.root()] = 1.0;
  for (NodeIndex c = 1; c < tree.size(); ++c) {
    const NodeIndex p = *tree.node(c).parent;
    out.z[c] = out.z[p] * (1.0 - mvt.lambda[p] * doob.martingale[c]);
  }
  out.is_signed = has_negative_value(out.z);
  return out;
}

/// Density of the variance-optimal signed martingale measure,
/// z_T = E(γ·S)_T / Y(root) with γ = -a. The terminal product (conditioned
/// back through the tree) and the process form Y·E(γ·S)/Y(root) are both
/// computed and must agree node-wise within 1e-10.
inline DensityProcess vomm_density(const ScenarioTree& tree, const AdaptedProcess& y2, const PredictableControl& a) {
  PredictableControl gamma(tree.size());
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (!tree.is_terminal(n)) gamma[n] = -a[n];
  }
  const auto exponential = stochastic_exponential(tree, gamma, tree.root());
  const double y0 = y2[tree.root()];

  AdaptedProcess terminal = tree.make_adapted();
  for (NodeIndex leaf : tree.terminals()) terminal[leaf] = exponential[leaf] / y0;
  const auto from_terminal = conditional_expectations_of_leaves(tree, terminal);

  DensityProcess out{tree.make_adapted(), false};
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    out.z[n] = y2[n] * exponential[n] / y0;
    if (std::abs(from_terminal[n] - out.z[n]) > 1e-10 * (1.0 + std::abs(out.z[n]))) {
      throw InternalError("variance-optimal density forms inconsistent at node '" + tree.node(n).id + "': " +
                          format_real(from_terminal[n]) + " vs " + format_real(out.z[n]));
    }
  }
  out.is_signed = has_negative_value(out.z);
  return out;
}

struct EquivalenceReport {
  bool equivalent = true;
  double margin = 0.0;               // min over edges of 1 + γ(parent)·ΔS
  std::optional<NodeIndex> tightest; // child node of the edge attaining the margin
};

/// Sufficient condition for the signed exponential E(γ·S) to stay strictly
/// positive: γ·ΔS > -1 on every edge.
inline EquivalenceReport equivalence_check(const ScenarioTree& tree, const PredictableControl& gamma) {
  EquivalenceReport out;
  for (NodeIndex c = 1; c < tree.size(); ++c) {
    const double factor = 1.0 + gamma[*tree.node(c).parent] * tree.price_step(c);
    if (!out.tightest || factor < out.margin) {
      out.margin = factor;
      out.tightest = c;
    }
  }
  out.equivalent = !out.tightest || out.margin > 0.0;
  return out;
}

struct NodeCheck {
  NodeIndex node = 0;
  double value = 0.0;  // quantity under test at this node
  double gap = 0.0;
};

struct IdentityReport {
  std::vector<NodeCheck> rows;
  std::vector<NodeIndex> skipped;  // nodes where the density vanishes
  std::vector<std::string> warnings;
  double max_gap = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

/// Dual identity E[(Z_T/Z_n)^2 | n]·y2(n) = 1 at every node with z(n) ≠ 0.
inline IdentityReport dual_value_check(const ScenarioTree& tree, const DensityProcess& density,
                                       const AdaptedProcess& y2, double tolerance = 1e-9) {
  AdaptedProcess squared = tree.make_adapted();
  for (NodeIndex leaf : tree.terminals()) squared[leaf] = density.z[leaf] * density.z[leaf];
  const auto second_moment = conditional_expectations_of_leaves(tree, squared);

  IdentityReport out;
  out.tolerance = tolerance;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const double z = density.z[n];
    if (std::abs(z) <= kDensityZeroTolerance) {
      out.skipped.push_back(n);
      out.warnings.push_back("density vanishes at node '" + tree.node(n).id + "'; dual identity skipped");
      continue;
    }
    const double value = second_moment[n] / (z * z) * y2[n];
    const double gap = std::abs(value - 1.0);
    out.rows.push_back({n, value, gap});
    out.max_gap = std::max(out.max_gap, gap);
  }
  out.passed = out.max_gap <= tolerance;
  return out;
}

/// Bayes-rule conditional price E_Q[H | n] = E[z_T H | n] / z(n) compared with
/// v1(n)/v2(n). Gaps are relative to max(1, |v1/v2|).
inline IdentityReport conditional_price(const ScenarioTree& tree, const DensityProcess& density,
                                        const AdaptedProcess& payoff, const CoefficientTriple& coeffs,
                                        double tolerance = 1e-9) {
  require_terminal_payoff(tree, payoff);
  AdaptedProcess weighted = tree.make_adapted();
  for (NodeIndex leaf : tree.terminals()) weighted[leaf] = density.z[leaf] * payoff[leaf];
  const auto numerator = conditional_expectations_of_leaves(tree, weighted);

  IdentityReport out;
  out.tolerance = tolerance;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const double z = density.z[n];
    if (std::abs(z) <= kDensityZeroTolerance) {
      out.skipped.push_back(n);
      out.warnings.push_back("density vanishes at node '" + tree.node(n).id + "'; conditional price skipped");
      continue;
    }
    const double price = numerator[n] / z;
    const double ratio = coeffs.v1[n] / coeffs.v2[n];
    const double gap = std::abs(price - ratio) / std::max(1.0, std::abs(ratio));
    out.rows.push_back({n, price, gap});
    out.max_gap = std::max(out.max_gap, gap);
  }
  out.passed = out.max_gap <= tolerance;
  return out;
}

// Two-Poisson counterexample: S jumps by +γ on one Poisson clock and by -γ
// on another (both intensity α = 1), with drift δ = (2+ε)γ. The minimal
// martingale density then jumps below zero, while Z = E(β n⁺ + (β+2+ε) n⁻)
// is a strictly positive martingale density.

struct AraiCheck {
  std::string name;
  double value = 0.0;
  double margin = 0.0;  // positive iff the check passes (except the exact identity)
  bool passed = false;
};

struct AraiReport {
  double gamma = 0.0;
  double epsilon = 0.0;
  double alpha = 1.0;
  double delta = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  std::vector<AraiCheck> checks;
  bool passed = false;
  std::string verdict;
};

inline constexpr const char* kAraiVerdict = "VOMM does not exist; P_e nonempty";

inline AraiReport arai_example_check(double gamma, double epsilon, double beta) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw DomainError("hypothesis violated: jump size gamma must lie in (0,1), got " + format_real(gamma));
  }
  if (!(epsilon > 0.0)) {
    throw DomainError("hypothesis violated: epsilon must be > 0 so that beta2 - beta1 > 2 strictly, got " +
                      format_real(epsilon));
  }
  if (!(beta > -1.0)) {
    throw DomainError("hypothesis violated: beta must be > -1 for a positive density, got " + format_real(beta));
  }

  AraiReport r;
  r.gamma = gamma;
  r.epsilon = epsilon;
  r.alpha = 1.0;
  r.delta = (2.0 + epsilon) * gamma;
  r.beta1 = beta;
  r.beta2 = beta + 2.0 + epsilon;

  // λ·ΔM at a jump of the up-clock.
  const double ratio = r.delta * gamma / (r.alpha * (gamma * gamma + gamma * gamma));
  r.checks.push_back({"tradeoff jump ratio > 1", ratio, ratio - 1.0, ratio > 1.0});

  const double factor = 1.0 - ratio;
  r.checks.push_back({"minimal density jump factor < 0", factor, -factor, factor < 0.0});

  const double residual = r.delta - (r.beta2 * gamma - r.beta1 * gamma) * r.alpha;
  const bool neutral = std::abs(residual) <= 1e-12 * std::max(1.0, std::abs(r.delta));
  r.checks.push_back({"positive density drift neutrality", residual, -std::abs(residual), neutral});

  const double spread = r.beta2 - r.beta1;
  const double margin = std::min({spread - 2.0, r.beta1 + 1.0, r.beta2 + 1.0});
  r.checks.push_back({"beta2 - beta1 > 2, both > -1", spread, margin, margin > 0.0});

  r.passed = std::all_of(r.checks.begin(), r.checks.end(), [](const AraiCheck& c) { return c.passed; });
  r.verdict = r.passed ? kAraiVerdict : "inconclusive";
  return r;
}

}  // namespace mvhedge

#endif  // MVHEDGE_MEASURES_HPP

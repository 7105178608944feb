#ifndef MVHEDGE_COEFFICIENT_RECURSION_HPP
#define MVHEDGE_COEFFICIENT_RECURSION_HPP

// Backward recursion for the coefficients of the quadratic value function
//
//   V_n(x) = v0(n) - 2 v1(n) x + v2(n) x^2,
//
// the minimal conditional expected squared hedging error at node n when the
// payoff H is hedged from capital x. Terminal values are v2 = 1, v1 = H,
// v0 = H^2. One step of dynamic programming minimises E[V_c(x + θ ΔS) | n]
// over θ, which gives, with D = E[v2 ΔS^2 | n],
//
//   v2(n) = E[v2] - E[v2 ΔS]^2 / D
//   v1(n) = E[v1] - E[v1 ΔS] E[v2 ΔS] / D
//   v0(n) = E[v0] - E[v1 ΔS]^2 / D
//
// and the minimiser θ* = b(n) - a(n) x with a = E[v2 ΔS]/D, b = E[v1 ΔS]/D.
// v2 alone is the opportunity process of the pure-investment problem.

#include <algorithm>
#include <cmath>
#include <string>

#include "mvhedge/tree_market.hpp"

namespace mvhedge {

struct CoefficientTriple {
  AdaptedProcess v0;
  AdaptedProcess v1;
  AdaptedProcess v2;
};

/// Feedback coefficients of the optimal strategy θ* = b - a·X.
/// `a` is the pure-investment adjustment (minus the exponent integrand of the
/// variance-optimal density); `b` is the payoff adjustment.
struct AdjustmentControls {
  PredictableControl a;
  PredictableControl b;
};

struct OpportunityProcess {
  AdaptedProcess y2;
  PredictableControl a;
};

namespace detail {

inline void check_positive(const ScenarioTree& tree, NodeIndex n, double y) {
  if (!(y > 0.0)) {
    throw InternalError("positivity violated: opportunity process " + format_real(y) + " at node '" +
                        tree.node(n).id + "'");
  }
}

}  // namespace detail

inline OpportunityProcess opportunity_process(const ScenarioTree& tree) {
  require_no_arbitrage(tree);
  OpportunityProcess out{tree.make_adapted(), PredictableControl(tree.size())};
  auto& y = out.y2;
  for (NodeIndex n = tree.size(); n-- > 0;) {
    if (tree.is_terminal(n)) {
      y[n] = 1.0;
      continue;
    }
    const double ey = expect_children(tree, n, [&](NodeIndex c) { return y[c]; });
    if (classify_step(tree, n) == StepKind::riskless) {
      y[n] = ey;
      out.a[n] = 0.0;
    } else {
      const double eys = expect_children(tree, n, [&](NodeIndex c) { return y[c] * tree.price_step(c); });
      const double eyss = expect_children(tree, n, [&](NodeIndex c) {
        const double ds = tree.price_step(c);
        return y[c] * ds * ds;
      });
      y[n] = ey - eys * eys / eyss;
      out.a[n] = eys / eyss;
    }
    detail::check_positive(tree, n, y[n]);
  }
  return out;
}

struct CoefficientSolution {
  CoefficientTriple coeffs;
  AdjustmentControls controls;
};

/// Solves all three coefficient recursions for the terminal payoff `payoff`
/// (only its terminal entries are read).
inline CoefficientSolution coefficient_system(const ScenarioTree& tree, const AdaptedProcess& payoff) {
  require_no_arbitrage(tree);
  require_terminal_payoff(tree, payoff);

  CoefficientSolution out{{tree.make_adapted(), tree.make_adapted(), tree.make_adapted()},
                          {PredictableControl(tree.size()), PredictableControl(tree.size())}};
  auto& [v0, v1, v2] = out.coeffs;
  auto& [a, b] = out.controls;

  for (NodeIndex n = tree.size(); n-- > 0;) {
    if (tree.is_terminal(n)) {
      const double h = payoff[n];
      v2[n] = 1.0;
      v1[n] = h;
      v0[n] = h * h;
      continue;
    }
    const double e0 = expect_children(tree, n, [&](NodeIndex c) { return v0[c]; });
    const double e1 = expect_children(tree, n, [&](NodeIndex c) { return v1[c]; });
    const double e2 = expect_children(tree, n, [&](NodeIndex c) { return v2[c]; });
    if (classify_step(tree, n) == StepKind::riskless) {
      v0[n] = e0;
      v1[n] = e1;
      v2[n] = e2;
      a[n] = 0.0;
      b[n] = 0.0;
    } else {
      const double e1s = expect_children(tree, n, [&](NodeIndex c) { return v1[c] * tree.price_step(c); });
      const double e2s = expect_children(tree, n, [&](NodeIndex c) { return v2[c] * tree.price_step(c); });
      const double d = expect_children(tree, n, [&](NodeIndex c) {
        const double ds = tree.price_step(c);
        return v2[c] * ds * ds;
      });
      v2[n] = e2 - e2s * e2s / d;
      v1[n] = e1 - e1s * e2s / d;
      v0[n] = e0 - e1s * e1s / d;
      a[n] = e2s / d;
      b[n] = e1s / d;
    }
    detail::check_positive(tree, n, v2[n]);
  }
  return out;
}

/// Closed-form opportunity process when the tradeoff increment λ²·Var[ΔS]
/// is the same at every node of a time level:
/// Y_k = Π_{j≥k} (1 + ΔK_j)^{-1}.
/// Throws DomainError naming the first level whose increments differ by more
/// than 1e-10·(1 + ΔK), the scale on which Y depends on ΔK.
inline AdaptedProcess deterministic_tradeoff_solution(const ScenarioTree& tree) {
  require_no_arbitrage(tree);
  const auto tradeoff = lambda_and_tradeoff(tree).tradeoff_increment;
  const int horizon = tree.horizon();

  std::vector<double> level_min(horizon, 0.0);
  std::vector<double> level_max(horizon, 0.0);
  std::vector<bool> seen(horizon, false);
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (tree.is_terminal(n)) continue;
    const int t = tree.node(n).time;
    const double k = tradeoff[n];
    if (!seen[t]) {
      level_min[t] = level_max[t] = k;
      seen[t] = true;
    } else {
      level_min[t] = std::min(level_min[t], k);
      level_max[t] = std::max(level_max[t], k);
    }
  }
  for (int t = 0; t < horizon; ++t) {
    const double spread = level_max[t] - level_min[t];
    if (spread > 1e-10 * (1.0 + std::abs(level_max[t]))) {
      throw DomainError("deterministic-tradeoff hypothesis violated: tradeoff increments at level " +
                        std::to_string(t) + " spread " + format_real(spread) + " (range [" +
                        format_real(level_min[t]) + ", " + format_real(level_max[t]) + "])");
    }
  }

  // Use the level mean so the result does not depend on which node is read.
  std::vector<double> level_value(horizon + 1, 1.0);
  for (int t = horizon - 1; t >= 0; --t) {
    level_value[t] = level_value[t + 1] / (1.0 + 0.5 * (level_min[t] + level_max[t]));
  }
  AdaptedProcess y = tree.make_adapted();
  for (NodeIndex n = 0; n < tree.size(); ++n) y[n] = level_value[tree.node(n).time];
  return y;
}

/// Martingale-part quantities of the opportunity process and the gap of the
/// recursion rewritten through them.
struct PsiAndG {
  PredictableControl psi;  // Cov(Y, ΔS | n) / Var[ΔS | n]
  PredictableControl g;    // E[(Y - E[Y|n]) ΔS^2 | n] / Var[ΔS | n]
  double residual = 0.0;   // max_n |Y(n) - (ᵖY - (ψ + λ ᵖY)^2 Var / (ᵖY (1 + λ^2 Var) + g))|
};

inline PsiAndG psi_and_g(const ScenarioTree& tree, const AdaptedProcess& y2) {
  const auto mvt = lambda_and_tradeoff(tree);
  PsiAndG out{PredictableControl(tree.size()), PredictableControl(tree.size()), 0.0};
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (tree.is_terminal(n)) continue;
    const double predictable_y = expect_children(tree, n, [&](NodeIndex c) { return y2[c]; });
    const double qv = mvt.qv_increment[n];
    if (qv == 0.0) {
      out.psi[n] = 0.0;
      out.g[n] = 0.0;
      out.residual = std::max(out.residual, std::abs(y2[n] - predictable_y));
      continue;
    }
    const double lambda = mvt.lambda[n];
    const double mean = expect_children(tree, n, [&](NodeIndex c) { return tree.price_step(c); });
    const double cov =
        expect_children(tree, n, [&](NodeIndex c) { return (y2[c] - predictable_y) * (tree.price_step(c) - mean); });
    const double third = expect_children(tree, n, [&](NodeIndex c) {
      const double ds = tree.price_step(c);
      return (y2[c] - predictable_y) * ds * ds;
    });
    const double psi = cov / qv;
    const double g = third / qv;
    out.psi[n] = psi;
    out.g[n] = g;
    const double num = psi + lambda * predictable_y;
    const double drift = num * num * qv / (predictable_y * (1.0 + lambda * lambda * qv) + g);
    out.residual = std::max(out.residual, std::abs(y2[n] - (predictable_y - drift)));
  }
  return out;
}

}  // namespace mvhedge

#endif  // MVHEDGE_COEFFICIENT_RECURSION_HPP

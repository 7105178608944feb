#ifndef MVHEDGE_ORACLE_HPP
#define MVHEDGE_ORACLE_HPP

// Brute-force reference solvers.
//
// Everything here is solved as one dense linear system over the whole
// (sub)tree and deliberately shares nothing with the backward recursions
// except the tree itself. Intended for trees of at most a few hundred nodes.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mvhedge/measures.hpp"
#include "mvhedge/tree_market.hpp"

namespace mvhedge::oracle {

struct Projection {
  PredictableControl theta;
  double value = 0.0;
  double kkt_residual = 0.0;  // ||G θ - r||_inf of the normal equations
};

/// Minimises E[(H - x - Σ θ_k ΔS_k)^2 | start] over one free position per
/// non-terminal node of the subtree. The normal equations are solved with a
/// complete orthogonal decomposition, so singular systems (riskless steps)
/// get the minimum-norm solution.
inline Projection project_strategy(const ScenarioTree& tree, const AdaptedProcess& payoff, double x,
                                   NodeIndex start) {
  require_terminal_payoff(tree, payoff);
  const auto nodes = tree.subtree(start);
  std::vector<long> column(tree.size(), -1);
  std::vector<NodeIndex> inner;
  std::vector<NodeIndex> leaves;
  for (NodeIndex n : nodes) {
    if (tree.is_terminal(n)) {
      leaves.push_back(n);
    } else {
      column[n] = static_cast<long>(inner.size());
      inner.push_back(n);
    }
  }

  Projection out{PredictableControl(tree.size()), 0.0, 0.0};
  const double base = tree.path_probability(start);
  if (inner.empty()) {
    const double r = payoff[start] - x;
    out.value = r * r;
    return out;
  }

  const auto rows = static_cast<Eigen::Index>(leaves.size());
  const auto cols = static_cast<Eigen::Index>(inner.size());
  Eigen::MatrixXd gains = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::VectorXd target(rows);
  Eigen::VectorXd weight(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const NodeIndex leaf = leaves[static_cast<std::size_t>(i)];
    weight(i) = tree.path_probability(leaf) / base;
    target(i) = payoff[leaf] - x;
    for (NodeIndex c = leaf; c != start;) {
      const NodeIndex p = *tree.node(c).parent;
      gains(i, column[p]) = tree.price_step(c);
      c = p;
    }
  }

  const Eigen::MatrixXd weighted = weight.asDiagonal() * gains;
  const Eigen::MatrixXd normal = gains.transpose() * weighted;
  const Eigen::VectorXd rhs = weighted.transpose() * target;
  const Eigen::VectorXd theta = normal.completeOrthogonalDecomposition().solve(rhs);

  out.kkt_residual = (normal * theta - rhs).cwiseAbs().maxCoeff();
  const Eigen::VectorXd residual = target - gains * theta;
  out.value = weight.dot(residual.cwiseProduct(residual));
  for (std::size_t k = 0; k < inner.size(); ++k) out.theta[inner[k]] = theta(static_cast<Eigen::Index>(k));
  return out;
}

inline Projection project_strategy(const ScenarioTree& tree, const AdaptedProcess& payoff, double x) {
  return project_strategy(tree, payoff, x, tree.root());
}

/// Minimal conditional hedging error from capital x at every node, one
/// projection per subtree.
inline AdaptedProcess conditional_values(const ScenarioTree& tree, const AdaptedProcess& payoff, double x) {
  require_terminal_payoff(tree, payoff);
  AdaptedProcess out = tree.make_adapted();
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (tree.is_terminal(n)) {
      const double r = payoff[n] - x;
      out[n] = r * r;
    } else {
      out[n] = project_strategy(tree, payoff, x, n).value;
    }
  }
  return out;
}

struct SignedMeasure {
  DensityProcess density;
  double objective = 0.0;           // E[z_T^2]
  long constraint_rows = 0;         // nonzero constraint rows before reduction
  long rank = 0;                    // independent rows kept in the KKT system
  double constraint_residual = 0.0; // max violation over all constraint rows
};

/// Minimises E[z_T^2] over terminal values z subject to E[z_T] = 1 and, at
/// each non-terminal node n, E[z_T ΔS_{n→child} ; paths through n] = 0.
/// Redundant constraint rows are dropped by a rank-revealing QR, then the
/// KKT system is solved by LU with partial pivoting.
inline SignedMeasure min_variance_signed_measure(const ScenarioTree& tree) {
  const auto leaves = tree.terminals();
  const auto n_leaves = static_cast<Eigen::Index>(leaves.size());
  std::vector<Eigen::Index> leaf_column(tree.size(), -1);
  for (Eigen::Index i = 0; i < n_leaves; ++i) leaf_column[leaves[static_cast<std::size_t>(i)]] = i;

  std::vector<Eigen::VectorXd> rows;
  Eigen::VectorXd mass(n_leaves);
  for (Eigen::Index i = 0; i < n_leaves; ++i) mass(i) = tree.path_probability(leaves[static_cast<std::size_t>(i)]);
  rows.push_back(mass);

  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (tree.is_terminal(n)) continue;
    Eigen::VectorXd row = Eigen::VectorXd::Zero(n_leaves);
    for (NodeIndex child : tree.children(n)) {
      const double step = tree.price_step(child);
      if (step == 0.0) continue;
      for (NodeIndex leaf : tree.subtree(child)) {
        if (tree.is_terminal(leaf)) row(leaf_column[leaf]) = tree.path_probability(leaf) * step;
      }
    }
    if (row.cwiseAbs().maxCoeff() > 0.0) rows.push_back(std::move(row));
  }

  const auto m = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd constraints(m, n_leaves);
  for (Eigen::Index r = 0; r < m; ++r) constraints.row(r) = rows[static_cast<std::size_t>(r)].transpose();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  rhs(0) = 1.0;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(constraints.transpose());
  qr.setThreshold(1e-12);
  const Eigen::Index rank = qr.rank();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < rank; ++k) keep.push_back(qr.colsPermutation().indices()(k));
  std::sort(keep.begin(), keep.end());

  const Eigen::Index dim = n_leaves + rank;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd kkt_rhs = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index i = 0; i < n_leaves; ++i) kkt(i, i) = 2.0 * mass(i);
  for (Eigen::Index k = 0; k < rank; ++k) {
    const auto r = keep[static_cast<std::size_t>(k)];
    kkt.block(n_leaves + k, 0, 1, n_leaves) = constraints.row(r);
    kkt.block(0, n_leaves + k, n_leaves, 1) = constraints.row(r).transpose();
    kkt_rhs(n_leaves + k) = rhs(r);
  }
  const Eigen::VectorXd solution = kkt.partialPivLu().solve(kkt_rhs);
  const Eigen::VectorXd z = solution.head(n_leaves);

  SignedMeasure out;
  out.constraint_rows = static_cast<long>(m);
  out.rank = static_cast<long>(rank);
  out.constraint_residual = (constraints * z - rhs).cwiseAbs().maxCoeff();
  if (!std::isfinite(out.constraint_residual) || out.constraint_residual > 1e-10) {
    throw ArbitrageError("no signed martingale measure with unit mass (constraint rows " + std::to_string(m) +
                         ", rank " + std::to_string(rank) + ", residual " + format_real(out.constraint_residual) +
                         ")");
  }

  AdaptedProcess terminal = tree.make_adapted();
  for (Eigen::Index i = 0; i < n_leaves; ++i) terminal[leaves[static_cast<std::size_t>(i)]] = z(i);
  out.density.z = conditional_expectations_of_leaves(tree, terminal);
  out.density.is_signed = has_negative_value(out.density.z);
  out.objective = mass.dot(z.cwiseProduct(z));
  return out;
}

}  // namespace mvhedge::oracle

#endif  // MVHEDGE_ORACLE_HPP

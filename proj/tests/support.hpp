#ifndef MVHEDGE_TESTS_SUPPORT_HPP
#define MVHEDGE_TESTS_SUPPORT_HPP

#include <cmath>
#include <string>
#include <vector>

#include "mvhedge/rng.hpp"
#include "mvhedge/tree_market.hpp"

namespace support {

using namespace mvhedge;

inline std::string scenario_path(const std::string& name) { return std::string(MVHEDGE_SCENARIO_DIR) + "/" + name; }

// S0 = 10, up 11 with 0.6, down 9 with 0.4.
inline ScenarioTree binomial() {
  return ScenarioTree({{"root", std::nullopt, 1.0, 10.0, std::nullopt},
                       {"up", "root", 0.6, 11.0, std::nullopt},
                       {"down", "root", 0.4, 9.0, std::nullopt}});
}

// Two iid periods of the same ±1 step.
inline ScenarioTree binomial_two_period() {
  return ScenarioTree({{"root", std::nullopt, 1.0, 10.0, std::nullopt},
                       {"u", "root", 0.6, 11.0, std::nullopt},
                       {"d", "root", 0.4, 9.0, std::nullopt},
                       {"uu", "u", 0.6, 12.0, std::nullopt},
                       {"ud", "u", 0.4, 10.0, std::nullopt},
                       {"du", "d", 0.6, 10.0, std::nullopt},
                       {"dd", "d", 0.4, 8.0, std::nullopt}});
}

// Trinomial root and a different step law below each time-1 node, so λ is
// random and the one-step martingale measure at the root is not unique.
inline ScenarioTree stochastic_lambda_tree() {
  return ScenarioTree({{"root", std::nullopt, 1.0, 10.0, std::nullopt},
                       {"u", "root", 0.4, 11.0, std::nullopt},
                       {"m", "root", 0.3, 9.8, std::nullopt},
                       {"d", "root", 0.3, 9.0, std::nullopt},
                       {"uu", "u", 0.7, 12.0, std::nullopt},
                       {"ud", "u", 0.3, 10.5, std::nullopt},
                       {"mu", "m", 0.5, 10.8, std::nullopt},
                       {"md", "m", 0.5, 8.8, std::nullopt},
                       {"du", "d", 0.5, 10.0, std::nullopt},
                       {"dm", "d", 0.2, 9.2, std::nullopt},
                       {"dd", "d", 0.3, 7.0, std::nullopt}});
}

// Price is a martingale at every node; includes a riskless single-child step.
inline ScenarioTree martingale_tree() {
  return ScenarioTree({{"root", std::nullopt, 1.0, 1.0, std::nullopt},
                       {"a", "root", 0.5, 1.5, std::nullopt},
                       {"b", "root", 0.5, 0.5, std::nullopt},
                       {"a0", "a", 0.25, 2.5, std::nullopt},
                       {"a1", "a", 0.75, 1.5 - 1.0 / 3.0, std::nullopt},
                       {"b0", "b", 1.0, 0.5, std::nullopt}});
}

inline AdaptedProcess terminal_price(const ScenarioTree& tree) {
  AdaptedProcess h = tree.make_adapted();
  for (NodeIndex i : tree.terminals()) h[i] = tree.price(i);
  return h;
}

inline AdaptedProcess constant_payoff(const ScenarioTree& tree, double c) {
  AdaptedProcess h = tree.make_adapted();
  for (NodeIndex i : tree.terminals()) h[i] = c;
  return h;
}

inline AdaptedProcess random_payoff(const ScenarioTree& tree, std::uint64_t seed) {
  auto gen = rng::Xoshiro256StarStar::substream(seed, 991);
  AdaptedProcess h = tree.make_adapted();
  for (NodeIndex i : tree.terminals()) h[i] = gen.uniform(-2.0, 2.0) + tree.price(i);
  return h;
}

inline PredictableControl random_control(const ScenarioTree& tree, std::uint64_t seed, double scale = 3.0) {
  auto gen = rng::Xoshiro256StarStar::substream(seed, 4242);
  PredictableControl theta(tree.size());
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (!tree.is_terminal(n)) theta[n] = gen.uniform(-scale, scale);
  }
  return theta;
}

// Independent path-sum: E[f(leaf)] over all terminal paths below `start`.
template <class F>
double path_sum(const ScenarioTree& tree, NodeIndex start, F&& f) {
  double total = 0.0;
  for (NodeIndex leaf : tree.terminals()) {
    NodeIndex c = leaf;
    while (c != start && tree.node(c).parent) c = *tree.node(c).parent;
    if (c == start) total += tree.path_probability(leaf) / tree.path_probability(start) * f(leaf);
  }
  return total;
}

// Least-squares parabola c0 + c1 x + c2 x^2 through (xs, ys), by 3x3 normal
// equations with Cramer's rule.
struct Parabola {
  double c0, c1, c2;
};

inline Parabola fit_parabola(const std::vector<double>& xs, const std::vector<double>& ys) {
  double s[5] = {0, 0, 0, 0, 0};
  double t[3] = {0, 0, 0};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k < 5; ++k) {
      s[k] += p;
      if (k < 3) t[k] += p * ys[i];
      p *= xs[i];
    }
  }
  auto det3 = [](double a, double b, double c, double d, double e, double f, double g, double h, double i) {
    return a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
  };
  const double d = det3(s[0], s[1], s[2], s[1], s[2], s[3], s[2], s[3], s[4]);
  return {det3(t[0], s[1], s[2], t[1], s[2], s[3], t[2], s[3], s[4]) / d,
          det3(s[0], t[0], s[2], s[1], t[1], s[3], s[2], t[2], s[4]) / d,
          det3(s[0], s[1], t[0], s[1], s[2], t[1], s[2], s[3], t[2]) / d};
}

}  // namespace support

#endif

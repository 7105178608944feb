#include <catch_amalgamated.hpp>

#include "mvhedge/hedging.hpp"
#include "mvhedge/random_tree.hpp"
#include "support.hpp"

using namespace mvhedge;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

// Pure-investment step with a = 0.5 at the root, so capital 1 is wiped out
// on the ΔS = 2 edge. Every time-1 node faces the same ±1 step, which keeps
// Y constant at time 1 and leaves a(root) unweighted.
ScenarioTree absorbing_tree() {
  std::vector<NodeRecord> r{{"r", std::nullopt, 1, 5, {}}, {"a", "r", 0.2, 7, {}}, {"b", "r", 0.2, 4, {}},
                            {"c", "r", 0.6, 6, {}}};
  for (const char* p : {"a", "b", "c"}) {
    const double s = p[0] == 'a' ? 7 : p[0] == 'b' ? 4 : 6;
    r.push_back({std::string(p) + "0", p, 0.6, s + 1, {}});
    r.push_back({std::string(p) + "1", p, 0.4, s - 1, {}});
  }
  return ScenarioTree(std::move(r));
}

}  // namespace

TEST_CASE("optimal_strategy examples", "[hedging]") {
  auto tree = support::binomial();
  SECTION("replication of H = S_T from x = 10") {
    auto sol = coefficient_system(tree, support::terminal_price(tree));
    auto s = optimal_strategy(tree, sol.coeffs, sol.controls, 10.0, 0);
    CHECK(s.theta[0] == Approx(1.0).epsilon(1e-14));
    CHECK(s.wealth[tree.index_of("up")] == Approx(11.0).epsilon(1e-14));
    CHECK(s.wealth[tree.index_of("down")] == Approx(9.0).epsilon(1e-14));
    CHECK_FALSE(s.theta.defined(tree.index_of("up")));
  }
  SECTION("pure investment follows the stochastic exponential") {
    for (std::uint64_t seed = 1; seed <= 30; ++seed) {
      auto t = random_tree(seed);
      auto sol = coefficient_system(t, support::constant_payoff(t, 0.0));
      auto s = optimal_strategy(t, sol.coeffs, sol.controls, 1.0, 0);
      PredictableControl gamma(t.size());
      for (NodeIndex n = 0; n < t.size(); ++n) {
        if (!t.is_terminal(n)) gamma[n] = -sol.controls.a[n];
      }
      auto e = stochastic_exponential(t, gamma, 0);
      for (NodeIndex n = 0; n < t.size(); ++n) {
        CHECK(s.wealth[n] == Approx(e[n]).epsilon(1e-13).margin(1e-15));
        if (!t.is_terminal(n)) CHECK(s.theta[n] == -sol.controls.a[n] * s.wealth[n]);
      }
    }
  }
  SECTION("cone vertex") {
    auto sol = coefficient_system(tree, support::constant_payoff(tree, 0.0));
    auto s = optimal_strategy(tree, sol.coeffs, sol.controls, 0.0, 0);
    CHECK(s.theta[0] == 0.0);
    for (NodeIndex n = 0; n < tree.size(); ++n) CHECK(s.wealth[n] == 0.0);
  }
  SECTION("started inside the tree") {
    auto t = support::binomial_two_period();
    auto sol = coefficient_system(t, support::terminal_price(t));
    const NodeIndex u = t.index_of("u");
    auto s = optimal_strategy(t, sol.coeffs, sol.controls, 11.0, u);
    CHECK(s.theta[u] == Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(s.wealth.defined(0));
    CHECK_FALSE(s.theta.defined(t.index_of("d")));
  }
}

TEST_CASE("value_at", "[hedging]") {
  auto tree = support::binomial();
  auto sol = coefficient_system(tree, support::terminal_price(tree));
  CHECK(value_at(sol.coeffs, 0, 10.0) == Approx(0.0).margin(1e-12));
  CHECK(value_at(sol.coeffs, 0, 0.0) == 96.0);

  auto zero = coefficient_system(tree, support::constant_payoff(tree, 0.0));
  for (NodeIndex n = 0; n < tree.size(); ++n) CHECK(value_at(zero.coeffs, n, 0.0) == 0.0);

  SECTION("clamping and rejection") {
    CoefficientTriple c{tree.make_adapted(0.0), tree.make_adapted(0.0), tree.make_adapted(1.0)};
    c.v0[0] = -5e-11;
    WarningSink warnings;
    CHECK(value_at(c, 0, 0.0, &warnings) == 0.0);
    REQUIRE(warnings.size() == 1);
    CHECK_THAT(warnings[0], ContainsSubstring("clamped"));
    c.v0[0] = -1e-6;
    CHECK_THROWS_WITH(value_at(c, 0, 0.0), ContainsSubstring("negative value: coefficients inconsistent"));
    CHECK_THROWS_AS(value_at(c, 99, 0.0), DomainError);
  }
}

TEST_CASE("verify_optimality", "[hedging]") {
  auto tree = support::binomial();
  auto sol = coefficient_system(tree, support::terminal_price(tree));
  auto star = optimal_strategy(tree, sol.coeffs, sol.controls, 10.0, 0);

  SECTION("probe equal to the optimum") {
    auto r = verify_optimality(tree, sol.coeffs, star.theta, star.theta, 10.0, 0);
    REQUIRE(r.rows.size() == 1);
    CHECK(std::abs(r.rows[0].drift_star) <= 1e-12);
    CHECK(std::abs(r.rows[0].drift_probe) <= 1e-12);
    CHECK(r.passed);
  }
  SECTION("not hedging from x = 10") {
    // V_0(10) = 0 and both leaves give (S_T - 10)^2 = 1.
    auto r = verify_optimality(tree, sol.coeffs, star.theta, tree.make_control(0.0), 10.0, 0);
    CHECK(r.rows[0].drift_probe == Approx(1.0).epsilon(1e-12));
    CHECK(r.passed);
  }
  SECTION("not hedging from x = 0") {
    // E[H^2] - v0 = 105 - 96.
    auto s0 = optimal_strategy(tree, sol.coeffs, sol.controls, 0.0, 0);
    auto r = verify_optimality(tree, sol.coeffs, s0.theta, tree.make_control(0.0), 0.0, 0);
    CHECK(r.rows[0].drift_probe == Approx(9.0).epsilon(1e-12));
  }
  SECTION("a wrong strategy is flagged") {
    auto r = verify_optimality(tree, sol.coeffs, tree.make_control(0.0), star.theta, 10.0, 0);
    CHECK_FALSE(r.star_passed);
    CHECK(r.probe_passed);
    CHECK(r.rows[0].flagged);
    CHECK(r.rows[0].star_violation);
  }
  SECTION("random probes on random trees") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      auto t = random_tree(seed);
      auto s = coefficient_system(t, payoff_from_tree(t));
      auto opt = optimal_strategy(t, s.coeffs, s.controls, 0.7, 0);
      auto r = verify_optimality(t, s.coeffs, opt.theta, support::random_control(t, seed), 0.7, 0);
      CHECK(r.star_passed);
      CHECK(r.probe_passed);
      CHECK(r.max_abs_drift_star <= 1e-10 * (1.0 + std::abs(s.coeffs.v0[0])));
    }
  }
}

TEST_CASE("hedging_error", "[hedging]") {
  auto tree = support::binomial();
  auto h = support::terminal_price(tree);
  auto sol = coefficient_system(tree, h);
  auto star = optimal_strategy(tree, sol.coeffs, sol.controls, 10.0, 0);
  CHECK(hedging_error(tree, h, star.theta, 10.0) == Approx(0.0).margin(1e-24));
  CHECK(hedging_error(tree, h, tree.make_control(0.0), 0.0) == Approx(105.0).epsilon(1e-15));

  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    auto t = random_tree(seed);
    auto hh = payoff_from_tree(t);
    auto s = coefficient_system(t, hh);
    for (double x : {-1.0, 0.0, 2.0}) {
      auto opt = optimal_strategy(t, s.coeffs, s.controls, x, 0);
      const double best = hedging_error(t, hh, opt.theta, x);
      CHECK(std::abs(best - value_at(s.coeffs, 0, x)) <= 1e-10 * (1.0 + best));
      for (std::uint64_t k = 0; k < 100; ++k) {
        CHECK(best <= hedging_error(t, hh, support::random_control(t, seed * 1000 + k), x) + 1e-12);
      }
    }
  }
}

TEST_CASE("affine structure and scaling", "[hedging][property]") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    auto t = random_tree(seed);
    auto h = payoff_from_tree(t);
    auto s = coefficient_system(t, h);
    auto z = coefficient_system(t, support::constant_payoff(t, 0.0));
    auto base = optimal_strategy(t, s.coeffs, s.controls, 0.0, 0);
    auto unit = optimal_strategy(t, z.coeffs, z.controls, 1.0, 0);
    for (double x : {-1.0, 0.5, 3.0}) {
      auto full = optimal_strategy(t, s.coeffs, s.controls, x, 0);
      auto pure = optimal_strategy(t, z.coeffs, z.controls, x, 0);
      CHECK(value_at(z.coeffs, 0, x) == Approx(x * x * z.coeffs.v2[0]).epsilon(1e-14));
      for (NodeIndex n = 0; n < t.size(); ++n) {
        if (t.is_terminal(n)) continue;
        CHECK(std::abs(full.theta[n] - (base.theta[n] + x * unit.theta[n])) <= 1e-10 * (1.0 + std::abs(full.theta[n])));
        CHECK(std::abs(pure.theta[n] - x * unit.theta[n]) <= 1e-12 * (1.0 + std::abs(pure.theta[n])));
      }
    }
  }
}

TEST_CASE("zero wealth is absorbing", "[hedging]") {
  auto t = absorbing_tree();
  auto s = coefficient_system(t, support::constant_payoff(t, 0.0));
  auto path = optimal_strategy(t, s.coeffs, s.controls, 1.0, 0);
  const NodeIndex a = t.index_of("a");
  REQUIRE(path.wealth[a] == Approx(0.0).margin(1e-15));
  for (NodeIndex n : t.subtree(a)) {
    CHECK(path.wealth[n] == Approx(0.0).margin(1e-15));
    if (!t.is_terminal(n)) CHECK(path.theta[n] == Approx(0.0).margin(1e-15));
  }
  CHECK(path.wealth[t.index_of("c")] != Approx(0.0).margin(1e-3));
}

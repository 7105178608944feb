// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mvhedge/cli.hpp"
#include "mvhedge/coefficient_recursion.hpp"
#include "mvhedge/hedging.hpp"
#include "mvhedge/jump_diffusion.hpp"
#include "mvhedge/measures.hpp"
#include "mvhedge/oracle.hpp"
#include "mvhedge/random_tree.hpp"
#include "support.hpp"

using namespace mvhedge;

namespace {

constexpr int kCorpusSize = 200;

struct Case {
  std::uint64_t seed;
  ScenarioTree tree;
  AdaptedProcess payoff;
  CoefficientSolution sol;
};

std::vector<Case> corpus() {
  std::vector<Case> out;
  for (std::uint64_t seed = 1; out.size() < kCorpusSize; ++seed) {
    auto tree = random_tree(seed);
    auto payoff = support::random_payoff(tree, seed);
    auto sol = coefficient_system(tree, payoff);
    out.push_back({seed, std::move(tree), std::move(payoff), std::move(sol)});
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// Runs `body`; an exception counts as a failure with its message.
void criterion(int id, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    auto [ok, detail] = body();
    report(id, ok, detail);
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

std::string run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_command(args, out, err);
  return std::to_string(code) + "\n" + out.str();
}

}  // namespace

int main() {
  const auto build_start = std::chrono::steady_clock::now();
  const auto cases = corpus();
  const double build_seconds = seconds_since(build_start);

  criterion(1, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    double worst_value = 0.0;
    double worst_theta = 0.0;
    bool ok = true;
    for (const auto& c : cases) {
      for (double x : {-1.0, 0.0, 2.0}) {
        const double v = value_at(c.sol.coeffs, c.tree.root(), x);
        const auto proj = oracle::project_strategy(c.tree, c.payoff, x);
        const double gap = std::abs(v - proj.value);
        worst_value = std::max(worst_value, gap);
        ok = ok && gap <= 1e-8 + 1e-8 * std::abs(proj.value);
        const auto star = optimal_strategy(c.tree, c.sol.coeffs, c.sol.controls, x, c.tree.root());
        for (NodeIndex n = 0; n < c.tree.size(); ++n) {
          if (c.tree.is_terminal(n)) continue;
          const double d = std::abs(star.theta[n] - proj.theta[n]);
          worst_theta = std::max(worst_theta, d);
          ok = ok && d <= 1e-8;
        }
      }
    }
    const double elapsed = seconds_since(t0) + build_seconds;
    ok = ok && elapsed < 30.0;
    return std::pair{ok, fmt("max value gap %.3g, max control gap %.3g, %.2f s", worst_value, worst_theta, elapsed)};
  });

  criterion(2, [&] {
    const std::vector<double> xs{-2, -1, 0, 1, 2};
    double worst = 0.0;
    for (const auto& c : cases) {
      std::vector<AdaptedProcess> values;
      for (double x : xs) values.push_back(oracle::conditional_values(c.tree, c.payoff, x));
      for (NodeIndex n = 0; n < c.tree.size(); ++n) {
        std::vector<double> ys;
        for (const auto& v : values) ys.push_back(v[n]);
        const auto fit = support::fit_parabola(xs, ys);
        worst = std::max({worst, std::abs(fit.c0 - c.sol.coeffs.v0[n]), std::abs(-0.5 * fit.c1 - c.sol.coeffs.v1[n]),
                          std::abs(fit.c2 - c.sol.coeffs.v2[n])});
      }
    }
    return std::pair{worst <= 1e-8, fmt("max coefficient gap %.3g", worst)};
  });

  criterion(3, [&] {
    double worst_star = 0.0;
    double min_probe = 0.0;
    for (const auto& c : cases) {
      const double x = 0.5;
      const auto star = optimal_strategy(c.tree, c.sol.coeffs, c.sol.controls, x, c.tree.root());
      for (std::uint64_t k = 0; k < 100; ++k) {
        const auto probe = support::random_control(c.tree, c.seed * 1000 + k);
        const auto rep = verify_optimality(c.tree, c.sol.coeffs, star.theta, probe, x, c.tree.root(), 1e-10);
        worst_star = std::max(worst_star, rep.max_abs_drift_star);
        min_probe = std::min(min_probe, rep.min_drift_probe);
      }
    }
    return std::pair{worst_star <= 1e-10 && min_probe >= -1e-10,
                     fmt("max |drift*| %.3g, min probe drift %.3g", worst_star, min_probe)};
  });

  criterion(4, [&] {
    bool ok = true;
    double worst_sub = 0.0;
    double min_v2 = 1.0;
    double max_v2 = 0.0;
    for (const auto& c : cases) {
      const auto& v2 = c.sol.coeffs.v2;
      for (NodeIndex n = 0; n < c.tree.size(); ++n) {
        min_v2 = std::min(min_v2, v2[n]);
        max_v2 = std::max(max_v2, v2[n]);
        // a riskless step averages ones with probabilities summing to 1 only up to rounding
        ok = ok && v2[n] > 0.0 && v2[n] <= 1.0 + 4 * DBL_EPSILON;
        if (c.tree.is_terminal(n)) continue;
        const double mean = expect_children(c.tree, n, [&](NodeIndex ch) { return v2[ch]; });
        worst_sub = std::max(worst_sub, v2[n] - mean);
      }
    }
    ok = ok && worst_sub <= 0.0;
    return std::pair{ok, fmt("v2 in [%.3g, 1 + %.3g], max v2(n) - E[v2 | n] %.3g", min_v2, max_v2 - 1.0, worst_sub)};
  });

  criterion(5, [&] {
    double worst_product = 0.0;
    double worst_dual = 0.0;
    for (const auto& c : cases) {
      const auto signed_measure = oracle::min_variance_signed_measure(c.tree);
      worst_product =
          std::max(worst_product, std::abs(signed_measure.objective * c.sol.coeffs.v2[c.tree.root()] - 1.0));
      const auto opp = opportunity_process(c.tree);
      const auto dual = dual_value_check(c.tree, vomm_density(c.tree, opp.y2, opp.a), opp.y2, 1e-9);
      worst_dual = std::max(worst_dual, dual.max_gap);
    }
    return std::pair{worst_product <= 1e-8 && worst_dual <= 1e-9,
                     fmt("max |objective*v2 - 1| %.3g, max dual gap %.3g", worst_product, worst_dual)};
  });

  criterion(6, [&] {
    double worst_leaf = 0.0;
    double worst_forms = 0.0;
    for (const auto& c : cases) {
      const auto opp = opportunity_process(c.tree);
      const auto z = vomm_density(c.tree, opp.y2, opp.a).z;
      const auto reference = oracle::min_variance_signed_measure(c.tree).density.z;
      for (NodeIndex leaf : c.tree.terminals()) worst_leaf = std::max(worst_leaf, std::abs(z[leaf] - reference[leaf]));
      for (NodeIndex n = 0; n < c.tree.size(); ++n) {
        const double conditioned = support::path_sum(c.tree, n, [&](NodeIndex leaf) { return z[leaf]; });
        worst_forms = std::max(worst_forms, std::abs(conditioned - z[n]));
      }
    }
    return std::pair{worst_leaf <= 1e-8 && worst_forms <= 1e-10,
                     fmt("max leaf gap vs oracle %.3g, max gap between forms %.3g", worst_leaf, worst_forms)};
  });

  criterion(7, [&] {
    double worst = 0.0;
    std::size_t skipped = 0;
    for (const auto& c : cases) {
      const auto opp = opportunity_process(c.tree);
      const auto density = vomm_density(c.tree, opp.y2, opp.a);
      const auto rep = conditional_price(c.tree, density, c.payoff, c.sol.coeffs, 1e-9);
      worst = std::max(worst, rep.max_gap);
      skipped += rep.skipped.size();
    }
    return std::pair{worst <= 1e-9, fmt("max relative gap %.3g, %zu nodes with z = 0 skipped", worst, skipped)};
  });

  criterion(8, [&] {
    RandomTreeOptions opt;
    opt.iid = true;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= kCorpusSize; ++seed) {
      const auto tree = random_tree(seed, opt);
      const auto closed = deterministic_tradeoff_solution(tree);
      const auto y2 = opportunity_process(tree).y2;
      for (NodeIndex n = 0; n < tree.size(); ++n) worst = std::max(worst, std::abs(closed[n] - y2[n]));
    }
    const auto one = support::binomial();
    const auto two = support::binomial_two_period();
    const double y_one = opportunity_process(one).y2[one.root()];
    const double y_two = opportunity_process(two).y2[two.root()];
    const double oracle_one = oracle::project_strategy(one, support::constant_payoff(one, 1.0), 0.0).value;
    const double oracle_two = oracle::project_strategy(two, support::constant_payoff(two, 1.0), 0.0).value;
    const bool ok = worst <= 1e-9 && std::abs(y_one - 0.96) <= 1e-12 && std::abs(y_two - 0.9216) <= 1e-12 &&
                    std::abs(oracle_one - 0.96) <= 1e-12 && std::abs(oracle_two - 0.9216) <= 1e-12;
    return std::pair{ok, fmt("max iid gap %.3g, one-period %.15g, two-period %.15g (oracle %.15g, %.15g)", worst,
                             y_one, y_two, oracle_one, oracle_two)};
  });

  criterion(9, [&] {
    const auto t0 = std::chrono::steady_clock::now();
    jd::JumpDiffusionParams p;  // μ = 0.05, σ = 0.2, η = 0.1, α = 2, T = 1
    const int steps = 500;
    const auto mc = jd::mc_pure_investment(p, steps, 100000, 42);
    const double elapsed = seconds_since(t0);
    const double target = std::exp(-1.0 / 24.0);
    const double gap = std::abs(mc.estimate - target);
    const double budget = 3.0 * mc.std_error + 5e-4;

    const auto grid = jd::uniform_grid(p.horizon, steps);
    std::vector<double> y(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) y[k] = jd::closed_form_opportunity(p, grid[k]);
    const std::vector<double> zeros(grid.size(), 0.0);
    const double residual = jd::bsde_residual(p, grid, y, zeros, zeros);

    const bool ok = gap <= budget && elapsed < 60.0 && residual <= 1e-6 && std::abs(mc.closed_form - target) <= 1e-15;
    return std::pair{ok, fmt("estimate %.6f vs %.6f, gap %.3g <= %.3g, bsde residual %.3g, %.2f s", mc.estimate,
                             target, gap, budget, residual, elapsed)};
  });

  criterion(10, [&] {
    const auto rep = arai_example_check(0.5, 0.5, 0.0);
    bool rejected = false;
    try {
      arai_example_check(0.5, 0.0, 0.0);
    } catch (const DomainError&) {
      rejected = true;
    }
    const bool ok = rep.passed && rep.checks.size() == 4 &&
                    std::all_of(rep.checks.begin(), rep.checks.end(), [](const auto& c) { return c.passed; }) &&
                    rejected;
    return std::pair{ok, fmt("%zu checks, verdict \"%s\", epsilon = 0 %s", rep.checks.size(), rep.verdict.c_str(),
                             rejected ? "rejected" : "accepted")};
  });

  criterion(11, [&] {
    const std::vector<std::vector<std::string>> commands{
        {"simulate-jd", "--steps", "100", "--paths", "5000", "--seed", "42", "--format", "structured"},
        {"solve", "--scenario", support::scenario_path("random_seed8.json"), "--payoff", "call strike=10", "--capital",
         "1", "--format", "structured"},
        {"oracle", "--scenario", support::scenario_path("random_seed8.json"), "--format", "structured"},
        {"measures", "--scenario", support::scenario_path("binomial_two_period.json"), "--format", "structured"},
        {"check-arai", "--format", "structured"}};
    std::size_t identical = 0;
    for (const auto& args : commands) {
      if (run(args) == run(args)) ++identical;
    }
    return std::pair{identical == commands.size(),
                     fmt("%zu of %zu commands byte-identical on rerun", identical, commands.size())};
  });

  return failures == 0 ? 0 : 1;
}

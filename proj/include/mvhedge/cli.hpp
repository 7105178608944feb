#ifndef MVHEDGE_CLI_HPP
#define MVHEDGE_CLI_HPP

// Command-line surface of the mvhedge tool.
//
//   mvhedge validate     --scenario <file>
//   mvhedge solve        --scenario <file> [--payoff <expr>] [--capital <x>]
//   mvhedge oracle       --scenario <file> [--payoff <expr>] [--capital <x>] [--tolerance <t>]
//   mvhedge measures     --scenario <file> [--payoff <expr>]
//   mvhedge simulate-jd  [--mu --sigma --eta --alpha --s0 --horizon] [--steps --paths --seed]
//   mvhedge check-arai   [--gamma --epsilon --beta]
//
// Common flags: --output <path> (default stdout), --format table|csv|structured.
// Exit codes: 0 all checks passed, 1 a check failed or the command raised an
// error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mvhedge/coefficient_recursion.hpp"
#include "mvhedge/hedging.hpp"
#include "mvhedge/jump_diffusion.hpp"
#include "mvhedge/measures.hpp"
#include "mvhedge/oracle.hpp"
#include "mvhedge/report.hpp"
#include "mvhedge/scenario_io.hpp"
#include "mvhedge/tree_market.hpp"

namespace mvhedge::cli {

/// Largest tree the brute-force oracle is run on.
inline constexpr std::size_t kOracleNodeLimit = 500;

struct Options {
  std::string scenario;
  double capital = 0.0;
  std::optional<std::string> payoff;
  std::optional<std::string> output;
  std::optional<std::string> format;
  std::uint64_t seed = 42;
  int steps = 500;
  long paths = 100000;
  double tolerance = 1e-8;
  jd::JumpDiffusionParams jump;
  double gamma = 0.5;
  double epsilon = 0.5;
  double beta = 0.0;
};

using io::Cell;
using io::Report;

namespace detail {

inline Cell opt_cell(double v) { return std::isnan(v) ? Cell{} : Cell{v}; }

inline io::Scenario load(const Options& opt) {
  std::optional<io::PayoffSpec> override_spec;
  if (opt.payoff) override_spec = io::parse_payoff_expression(*opt.payoff);
  return io::parse_scenario(opt.scenario, override_spec);
}

inline void require_solvable(const io::Scenario& s) {
  if (!s.arbitrage_free) throw ArbitrageError("arbitrage detected in scenario; refusing to solve");
}

inline AdaptedProcess payoff_or_zero(const io::Scenario& s) {
  if (s.payoff) return *s.payoff;
  AdaptedProcess h = s.tree.make_adapted();
  for (NodeIndex i : s.tree.terminals()) h[i] = 0.0;
  return h;
}

inline double scaled_gap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

inline double martingale_defect(const ScenarioTree& tree, const AdaptedProcess& z) {
  double worst = 0.0;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (!tree.is_terminal(n)) worst = std::max(worst, std::abs(cond_exp(tree, z, n) - z[n]));
  }
  return worst;
}

}  // namespace detail

inline Report cmd_validate(const Options& opt) {
  Report r;
  r.command = "validate";
  r.columns = {"id", "rule", "message"};
  const auto doc = io::parse_scenario_document(io::read_file(opt.scenario));
  ScenarioTree tree(doc.records);
  const auto violations = validate_tree(tree);
  for (const auto& v : violations) r.rows.push_back({v.node_id, v.rule, v.message});
  r.summary = {{"nodes", static_cast<long long>(tree.size())},
               {"horizon", static_cast<long long>(tree.horizon())},
               {"violations", static_cast<long long>(violations.size())}};
  const bool arbitrage_free = no_arbitrage_check(tree);
  r.summary.emplace_back("arbitrage_free", arbitrage_free);
  if (!arbitrage_free) r.warnings.push_back("arbitrage detected: solve commands will refuse this scenario");
  r.add_check("tree invariants", static_cast<double>(violations.size()), 0.0, violations.empty());
  return r;
}

inline Report cmd_solve(const Options& opt) {
  const auto scenario = detail::load(opt);
  detail::require_solvable(scenario);
  const auto& tree = scenario.tree;
  const auto payoff = detail::payoff_or_zero(scenario);
  const double x = opt.capital;

  const auto sol = coefficient_system(tree, payoff);
  const auto strategy = optimal_strategy(tree, sol.coeffs, sol.controls, x, tree.root());
  const auto mmm = minimal_martingale_density(tree);
  const auto vomm = vomm_density(tree, sol.coeffs.v2, sol.controls.a);

  Report r;
  r.command = "solve";
  r.warnings = scenario.warnings;
  r.columns = {"time", "id", "v0", "v1", "v2", "theta", "wealth", "mmm_density", "vomm_density"};
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    r.rows.push_back({static_cast<long long>(tree.node(n).time), tree.node(n).id, sol.coeffs.v0[n], sol.coeffs.v1[n],
                      sol.coeffs.v2[n], detail::opt_cell(strategy.theta[n]), strategy.wealth[n], mmm.z[n],
                      vomm.z[n]});
  }

  WarningSink warnings;
  const double root_value = value_at(sol.coeffs, tree.root(), x, &warnings);
  for (auto& w : warnings) r.warnings.push_back(std::move(w));
  const double error = hedging_error(tree, payoff, strategy.theta, x);
  const auto certificate = verify_optimality(tree, sol.coeffs, strategy.theta, tree.make_control(0.0), x, tree.root());

  r.summary = {{"payoff", scenario.expression ? scenario.expression->to_string()
                                              : (scenario.payoff ? "explicit" : "zero")},
               {"capital", x},
               {"root_value", root_value},
               {"hedging_error", error},
               {"opportunity_root", sol.coeffs.v2[tree.root()]},
               {"theta_root", detail::opt_cell(strategy.theta[tree.root()])},
               {"mmm_signed", mmm.is_signed},
               {"vomm_signed", vomm.is_signed}};

  r.add_check("hedging error equals root value", detail::scaled_gap(error, root_value), 1e-10,
              detail::scaled_gap(error, root_value) <= 1e-10);
  r.add_check("optimal drift vanishes", certificate.max_abs_drift_star, 1e-10, certificate.star_passed);
  r.add_check("zero-strategy drift nonnegative", certificate.min_drift_probe, 1e-10, certificate.probe_passed);

  if (tree.size() <= kOracleNodeLimit) {
    const auto projection = oracle::project_strategy(tree, payoff, x);
    const double gap = detail::scaled_gap(root_value, projection.value);
    r.summary.emplace_back("oracle_gap", std::abs(root_value - projection.value));
    r.add_check("oracle value gap", gap, opt.tolerance, gap <= opt.tolerance);
    const auto measure = oracle::min_variance_signed_measure(tree);
    const double duality = std::abs(measure.objective * sol.coeffs.v2[tree.root()] - 1.0);
    r.summary.emplace_back("duality_gap", duality);
    r.add_check("duality gap", duality, 1e-8, duality <= 1e-8);
  } else {
    r.summary.emplace_back("oracle_gap", Cell{});
    const auto dual = dual_value_check(tree, vomm, sol.coeffs.v2);
    r.summary.emplace_back("duality_gap", dual.max_gap);
    r.add_check("duality gap", dual.max_gap, dual.tolerance, dual.passed);
  }
  return r;
}

inline Report cmd_oracle(const Options& opt) {
  const auto scenario = detail::load(opt);
  detail::require_solvable(scenario);
  const auto& tree = scenario.tree;
  if (tree.size() > kOracleNodeLimit) {
    throw DomainError("tree has " + std::to_string(tree.size()) + " nodes; the oracle is limited to " +
                      std::to_string(kOracleNodeLimit));
  }
  const auto payoff = detail::payoff_or_zero(scenario);
  const double x = opt.capital;

  const auto sol = coefficient_system(tree, payoff);
  const auto strategy = optimal_strategy(tree, sol.coeffs, sol.controls, x, tree.root());
  const auto brute = oracle::conditional_values(tree, payoff, x);
  const auto projection = oracle::project_strategy(tree, payoff, x);

  Report r;
  r.command = "oracle";
  r.warnings = scenario.warnings;
  r.columns = {"time", "id", "value_recursion", "value_oracle", "value_gap", "theta_recursion", "theta_oracle",
               "theta_gap"};
  double max_value_gap = 0.0;
  double max_theta_gap = 0.0;
  bool values_ok = true;
  bool thetas_ok = true;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const double v = quadratic_value(sol.coeffs, n, x);
    const double gap = std::abs(v - brute[n]);
    max_value_gap = std::max(max_value_gap, gap);
    values_ok = values_ok && gap <= opt.tolerance * (1.0 + std::abs(brute[n]));
    double theta_gap = kUndefined;
    if (!tree.is_terminal(n)) {
      theta_gap = std::abs(strategy.theta[n] - projection.theta[n]);
      max_theta_gap = std::max(max_theta_gap, theta_gap);
      thetas_ok = thetas_ok && theta_gap <= opt.tolerance * (1.0 + std::abs(projection.theta[n]));
    }
    r.rows.push_back({static_cast<long long>(tree.node(n).time), tree.node(n).id, v, brute[n], gap,
                      detail::opt_cell(strategy.theta[n]), detail::opt_cell(projection.theta[n]),
                      detail::opt_cell(theta_gap)});
  }
  const auto measure = oracle::min_variance_signed_measure(tree);
  const double duality = std::abs(measure.objective * sol.coeffs.v2[tree.root()] - 1.0);

  r.summary = {{"capital", x},
               {"max_value_gap", max_value_gap},
               {"max_theta_gap", max_theta_gap},
               {"kkt_residual", projection.kkt_residual},
               {"dual_objective", measure.objective},
               {"duality_gap", duality}};
  r.add_check("value gap (abs + rel)", max_value_gap, opt.tolerance, values_ok);
  r.add_check("strategy gap (abs + rel)", max_theta_gap, opt.tolerance, thetas_ok);
  r.add_check("duality gap", duality, opt.tolerance, duality <= opt.tolerance);
  return r;
}

inline Report cmd_measures(const Options& opt) {
  const auto scenario = detail::load(opt);
  detail::require_solvable(scenario);
  const auto& tree = scenario.tree;
  const auto payoff = detail::payoff_or_zero(scenario);

  const auto sol = coefficient_system(tree, payoff);
  const auto mmm = minimal_martingale_density(tree);
  const auto vomm = vomm_density(tree, sol.coeffs.v2, sol.controls.a);
  PredictableControl gamma(tree.size());
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    if (!tree.is_terminal(n)) gamma[n] = -sol.controls.a[n];
  }
  const auto equivalence = equivalence_check(tree, gamma);
  const auto dual = dual_value_check(tree, vomm, sol.coeffs.v2);
  const auto price = conditional_price(tree, vomm, payoff, sol.coeffs);

  std::optional<oracle::SignedMeasure> brute;
  if (tree.size() <= kOracleNodeLimit) brute = oracle::min_variance_signed_measure(tree);

  std::map<NodeIndex, double> dual_at;
  for (const auto& row : dual.rows) dual_at[row.node] = row.value;
  std::map<NodeIndex, double> price_at;
  for (const auto& row : price.rows) price_at[row.node] = row.value;

  Report r;
  r.command = "measures";
  r.warnings = scenario.warnings;
  for (const auto& w : dual.warnings) r.warnings.push_back(w);
  for (const auto& w : price.warnings) r.warnings.push_back(w);
  r.columns = {"time", "id", "mmm_density", "vomm_density", "oracle_density", "dual_ratio", "bayes_price",
               "v1_over_v2"};
  double oracle_gap = 0.0;
  for (NodeIndex n = 0; n < tree.size(); ++n) {
    const double od = brute ? brute->density.z[n] : kUndefined;
    if (brute) oracle_gap = std::max(oracle_gap, std::abs(od - vomm.z[n]));
    r.rows.push_back({static_cast<long long>(tree.node(n).time), tree.node(n).id, mmm.z[n], vomm.z[n],
                      detail::opt_cell(od), dual_at.count(n) ? Cell{dual_at[n]} : Cell{},
                      price_at.count(n) ? Cell{price_at[n]} : Cell{}, sol.coeffs.v1[n] / sol.coeffs.v2[n]});
  }

  r.summary = {{"mmm_signed", mmm.is_signed},
               {"vomm_signed", vomm.is_signed},
               {"vomm_equivalent", equivalence.equivalent},
               {"equivalence_margin", equivalence.margin},
               {"tightest_edge", equivalence.tightest ? tree.node(*equivalence.tightest).id : std::string{}},
               {"vomm_second_moment", 1.0 / sol.coeffs.v2[tree.root()]},
               {"verdict", equivalence.equivalent ? std::string("variance-optimal measure is equivalent")
                                                  : std::string("variance-optimal signed measure may fail equivalence")}};
  if (brute) r.summary.emplace_back("oracle_objective", brute->objective);

  r.add_check("dual identity", dual.max_gap, dual.tolerance, dual.passed);
  r.add_check("conditional price identity", price.max_gap, price.tolerance, price.passed);
  const double mmm_defect = detail::martingale_defect(tree, mmm.z);
  const double vomm_defect = detail::martingale_defect(tree, vomm.z);
  r.add_check("minimal density martingale", mmm_defect, 1e-10, mmm_defect <= 1e-10);
  r.add_check("variance-optimal density martingale", vomm_defect, 1e-10, vomm_defect <= 1e-10);
  if (brute) r.add_check("variance-optimal density vs oracle", oracle_gap, 1e-8, oracle_gap <= 1e-8);
  return r;
}

inline Report cmd_simulate_jd(const Options& opt) {
  const auto& p = opt.jump;
  const auto mc = jd::mc_pure_investment(p, opt.steps, opt.paths, opt.seed);
  const auto grid = jd::uniform_grid(p.horizon, opt.steps);
  std::vector<double> y(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) y[k] = jd::closed_form_opportunity(p, grid[k]);
  const std::vector<double> zeros(grid.size(), 0.0);
  const double residual = jd::bsde_residual(p, grid, y, zeros, zeros);

  constexpr double kBiasBudget = 5e-4;
  const double price_closed = p.s0 * std::exp(p.mu * p.horizon);
  auto z_score = [](double est, double se, double cf) { return se > 0.0 ? Cell{(est - cf) / se} : Cell{}; };

  Report r;
  r.command = "simulate-jd";
  r.columns = {"quantity", "estimate", "stderr", "closed_form", "z_score"};
  r.rows.push_back({std::string("pure_investment_value"), mc.estimate, mc.std_error, mc.closed_form,
                    z_score(mc.estimate, mc.std_error, mc.closed_form)});
  r.rows.push_back({std::string("zero_strategy_value"), mc.zero_strategy_estimate, mc.zero_strategy_stderr, 1.0,
                    Cell{}});
  r.rows.push_back({std::string("terminal_price_mean"), mc.terminal_price_mean, mc.terminal_price_stderr,
                    price_closed, z_score(mc.terminal_price_mean, mc.terminal_price_stderr, price_closed)});
  r.rows.push_back({std::string("bsde_residual"), residual, 0.0, 0.0, Cell{}});

  r.summary = {{"mu", p.mu},         {"sigma", p.sigma},
               {"eta", p.eta},       {"alpha", p.alpha},
               {"s0", p.s0},         {"horizon", p.horizon},
               {"steps", static_cast<long long>(opt.steps)},
               {"paths", static_cast<long long>(opt.paths)},
               {"seed", std::to_string(opt.seed)},
               {"tradeoff_rate", jd::tradeoff_rate(p)},
               {"rejections", static_cast<long long>(mc.rejections)}};

  const double gap = std::abs(mc.estimate - mc.closed_form);
  const double budget = 3.0 * mc.std_error + kBiasBudget;
  r.add_check("pure-investment value vs closed form", gap, budget, gap <= budget);
  const double price_gap = std::abs(mc.terminal_price_mean - price_closed);
  const double price_budget = 3.0 * mc.terminal_price_stderr + kBiasBudget * p.s0;
  r.add_check("terminal price mean vs closed form", price_gap, price_budget, price_gap <= price_budget);
  r.add_check("closed-form BSDE residual", residual, 1e-6, residual <= 1e-6);
  return r;
}

inline Report cmd_check_arai(const Options& opt) {
  const auto report = arai_example_check(opt.gamma, opt.epsilon, opt.beta);
  Report r;
  r.command = "check-arai";
  r.columns = {"check", "value", "margin", "passed"};
  for (const auto& c : report.checks) r.rows.push_back({c.name, c.value, c.margin, c.passed});
  r.summary = {{"gamma", report.gamma},   {"epsilon", report.epsilon}, {"alpha", report.alpha},
               {"delta", report.delta},   {"beta1", report.beta1},     {"beta2", report.beta2},
               {"verdict", report.verdict}};
  for (const auto& c : report.checks) r.add_check(c.name, c.value, 0.0, c.passed);
  return r;
}

/// Runs one invocation; `args` excludes the program name.
inline int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-variance hedging on scenario trees", "mvhedge"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--output", opt.output, "Write the report to this file instead of stdout");
    sub->add_option("--format", opt.format, "Report format")->check(CLI::IsMember({"table", "csv", "structured"}));
  };
  auto add_tree = [&](CLI::App* sub, bool with_payoff) {
    sub->add_option("--scenario", opt.scenario, "Scenario file")->required();
    if (with_payoff) {
      sub->add_option("--payoff", opt.payoff, "Payoff expression overriding the file");
      sub->add_option("--capital", opt.capital, "Initial capital x")->capture_default_str();
    }
  };

  auto* validate = app.add_subcommand("validate", "Check a scenario file against the tree invariants");
  add_tree(validate, false);
  add_common(validate);

  auto* solve = app.add_subcommand("solve", "Coefficients, optimal strategy, wealth and densities per node");
  add_tree(solve, true);
  add_common(solve);
  solve->add_option("--tolerance", opt.tolerance, "Tolerance of the oracle comparison")->capture_default_str();

  auto* orc = app.add_subcommand("oracle", "Backward recursion against brute-force projections");
  add_tree(orc, true);
  add_common(orc);
  orc->add_option("--tolerance", opt.tolerance, "Absolute and relative tolerance")->capture_default_str();

  auto* meas = app.add_subcommand("measures", "Minimal and variance-optimal densities with duality checks");
  add_tree(meas, false);
  meas->add_option("--payoff", opt.payoff, "Payoff expression for the conditional-price check");
  add_common(meas);

  auto* sim = app.add_subcommand("simulate-jd", "Jump-diffusion Monte Carlo against the closed form");
  add_common(sim);
  sim->add_option("--mu", opt.jump.mu)->capture_default_str();
  sim->add_option("--sigma", opt.jump.sigma)->capture_default_str();
  sim->add_option("--eta", opt.jump.eta)->capture_default_str();
  sim->add_option("--alpha", opt.jump.alpha)->capture_default_str();
  sim->add_option("--s0", opt.jump.s0)->capture_default_str();
  sim->add_option("--horizon", opt.jump.horizon)->capture_default_str();
  sim->add_option("--steps", opt.steps)->capture_default_str();
  sim->add_option("--paths", opt.paths)->capture_default_str();
  sim->add_option("--seed", opt.seed)->capture_default_str();

  auto* arai = app.add_subcommand("check-arai", "Algebraic checks of the two-Poisson counterexample");
  add_common(arai);
  arai->add_option("--gamma", opt.gamma)->capture_default_str();
  arai->add_option("--epsilon", opt.epsilon)->capture_default_str();
  arai->add_option("--beta", opt.beta)->capture_default_str();

  std::vector<const char*> argv{"mvhedge"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  io::Format format = io::Format::table;
  if (sim->parsed()) format = io::Format::csv;
  if (opt.format) {
    if (*opt.format == "csv") format = io::Format::csv;
    else if (*opt.format == "structured") format = io::Format::structured;
    else format = io::Format::table;
  }

  Report report;
  try {
    if (validate->parsed()) report = cmd_validate(opt);
    else if (solve->parsed()) report = cmd_solve(opt);
    else if (orc->parsed()) report = cmd_oracle(opt);
    else if (meas->parsed()) report = cmd_measures(opt);
    else if (sim->parsed()) report = cmd_simulate_jd(opt);
    else report = cmd_check_arai(opt);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  const std::string text = io::render(report, format);
  if (opt.output) {
    std::ofstream file(*opt.output, std::ios::binary);
    if (!file) {
      err << "error: cannot write '" << *opt.output << "'\n";
      return 1;
    }
    file << text;
  } else {
    out << text;
  }
  if (format == io::Format::csv) {
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";
    for (const auto& c : report.checks) {
      if (!c.passed) err << "FAIL " << c.name << ": " << c.value << " (tolerance " << c.tolerance << ")\n";
    }
  }
  return report.passed() ? 0 : 1;
}

}  // namespace mvhedge::cli

#endif  // MVHEDGE_CLI_HPP

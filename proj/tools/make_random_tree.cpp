// Writes a seeded random arbitrage-free scenario (with explicit payoffs) to stdout.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

#include "mvhedge/random_tree.hpp"
#include "mvhedge/scenario_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a random scenario tree", "make_random_tree"};
  std::uint64_t seed = 1;
  mvhedge::RandomTreeOptions opt;
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--max-depth", opt.max_depth)->capture_default_str()->check(CLI::Range(1, 8));
  app.add_option("--max-children", opt.max_children)->capture_default_str()->check(CLI::Range(2, 6));
  app.add_flag("--iid", opt.iid, "Use one step distribution for every node");
  CLI11_PARSE(app, argc, argv);

  std::cout << mvhedge::io::serialize_scenario(mvhedge::random_tree(seed, opt));
  return 0;
}

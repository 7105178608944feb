#ifndef MVHEDGE_RANDOM_TREE_HPP
#define MVHEDGE_RANDOM_TREE_HPP

// Seeded generator of small arbitrage-free scenario trees with random payoffs,
// used for property tests and the acceptance corpus.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mvhedge/rng.hpp"
#include "mvhedge/tree_market.hpp"

namespace mvhedge {

struct RandomTreeOptions {
  int max_depth = 4;
  int max_children = 3;
  double riskless_probability = 0.1;  // chance that a node gets a riskless step
  bool iid = false;                   // every node shares one step distribution
};

namespace detail {

struct StepLaw {
  std::vector<double> steps;
  std::vector<double> probs;
};

inline StepLaw draw_step_law(rng::Xoshiro256StarStar& gen, const RandomTreeOptions& opt) {
  StepLaw law;
  if (gen.uniform() < opt.riskless_probability) {
    const int k = 1 + static_cast<int>(gen.below(static_cast<std::uint64_t>(opt.max_children)));
    law.steps.assign(static_cast<std::size_t>(k), 0.0);
  } else {
    const int k = 2 + static_cast<int>(gen.below(static_cast<std::uint64_t>(std::max(1, opt.max_children - 1))));
    law.steps.push_back(gen.uniform(0.05, 0.5));
    law.steps.push_back(-gen.uniform(0.05, 0.5));
    for (int i = 2; i < k; ++i) law.steps.push_back(gen.uniform(-0.5, 0.5));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < law.steps.size(); ++i) {
    law.probs.push_back(0.2 + gen.uniform());
    total += law.probs.back();
  }
  for (auto& p : law.probs) p /= total;
  return law;
}

}  // namespace detail

/// Arbitrage-free tree of uniform depth in [1, max_depth]; every terminal
/// node carries a random payoff mixing the price, a call and noise.
inline ScenarioTree random_tree(std::uint64_t seed, const RandomTreeOptions& opt = {}) {
  auto gen = rng::Xoshiro256StarStar::substream(seed, 0x7265657274ULL);
  const int horizon = 1 + static_cast<int>(gen.below(static_cast<std::uint64_t>(opt.max_depth)));
  const double linear = gen.uniform(-1.0, 1.0);
  const double call = gen.uniform(0.0, 2.0);
  const double strike = gen.uniform(0.8, 1.2);

  std::vector<NodeRecord> records;
  records.push_back({"n", std::nullopt, 1.0, gen.uniform(0.8, 1.2), std::nullopt});
  const detail::StepLaw shared = detail::draw_step_law(gen, opt);

  std::vector<std::size_t> frontier{0};
  for (int t = 0; t < horizon; ++t) {
    std::vector<std::size_t> next;
    for (std::size_t parent : frontier) {
      const auto law = opt.iid ? shared : detail::draw_step_law(gen, opt);
      for (std::size_t k = 0; k < law.steps.size(); ++k) {
        NodeRecord r;
        r.id = records[parent].id + "." + std::to_string(k);
        r.parent = records[parent].id;
        r.prob = law.probs[k];
        r.price = records[parent].price + law.steps[k];
        next.push_back(records.size());
        records.push_back(std::move(r));
      }
    }
    frontier = std::move(next);
  }
  for (std::size_t leaf : frontier) {
    const double s = records[leaf].price;
    records[leaf].payoff = linear * s + call * std::max(s - strike, 0.0) + gen.uniform(-0.5, 0.5);
  }
  return ScenarioTree(std::move(records));
}

}  // namespace mvhedge

#endif  // MVHEDGE_RANDOM_TREE_HPP

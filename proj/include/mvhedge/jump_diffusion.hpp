#ifndef MVHEDGE_JUMP_DIFFUSION_HPP
#define MVHEDGE_JUMP_DIFFUSION_HPP

// Jump-diffusion dS = S_-(μ dt + σ dW + η dn), n = N - αt compensated Poisson,
// with constant coefficients. The mean-variance tradeoff is deterministic,
// κ = μ² / (σ² + αη²) per unit time, so the opportunity process is
// Y_t = exp(κ (t - T)) and the optimal pure-investment wealth is the
// stochastic exponential of -μ/(σ² + αη²) times the return process.
//
// Paths use the multiplicative Euler step
//   S_{k+1} = S_k (1 + μΔ + σ√Δ ξ + η (ΔN - αΔ)),
// redrawing (ξ, ΔN) whenever the factor is not positive. Path p uses the
// random substream (seed, p) of rng.hpp; ξ is drawn before ΔN on every attempt.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mvhedge/error.hpp"
#include "mvhedge/rng.hpp"
#include "mvhedge/tree_market.hpp"

namespace mvhedge::jd {

struct JumpDiffusionParams {
  double mu = 0.05;
  double sigma = 0.2;
  double eta = 0.1;
  double alpha = 2.0;
  double s0 = 1.0;
  double horizon = 1.0;
};

/// Cap on the fraction of redrawn Euler steps.
inline constexpr double kMaxRejectionRate = 0.01;

/// Redraws allowed for a single step before the grid is declared too coarse.
inline constexpr int kMaxRedrawsPerStep = 1000;

inline void validate(const JumpDiffusionParams& p) {
  if (!(p.sigma > 0.0 && std::isfinite(p.sigma))) throw DomainError("sigma must be positive");
  if (!(p.eta > -1.0 && std::isfinite(p.eta))) throw DomainError("eta must be > -1 to keep prices positive");
  if (!(p.alpha >= 0.0 && std::isfinite(p.alpha))) throw DomainError("alpha must be nonnegative");
  if (!(p.s0 > 0.0 && std::isfinite(p.s0))) throw DomainError("s0 must be positive");
  if (!(p.horizon > 0.0 && std::isfinite(p.horizon))) throw DomainError("horizon must be positive");
  if (!std::isfinite(p.mu)) throw DomainError("mu must be finite");
}

/// Martingale-part variance rate per unit price², σ² + αη².
inline double variance_rate(const JumpDiffusionParams& p) { return p.sigma * p.sigma + p.alpha * p.eta * p.eta; }

/// Mean-variance tradeoff rate κ = μ² / (σ² + αη²).
inline double tradeoff_rate(const JumpDiffusionParams& p) { return p.mu * p.mu / variance_rate(p); }

/// Optimal pure-investment position per unit of wealth and unit return.
inline double pure_investment_proportion(const JumpDiffusionParams& p) { return -p.mu / variance_rate(p); }

/// Opportunity process at time t: exp(κ (t - T)).
inline double closed_form_opportunity(const JumpDiffusionParams& p, double t) {
  validate(p);
  if (!(t >= 0.0 && t <= p.horizon)) throw DomainError("time outside [0, horizon]");
  return std::exp(tradeoff_rate(p) * (t - p.horizon));
}

/// Jump factor of the optimal exponential, c·η with c = -μ/(σ²+αη²). The
/// associated density stays positive iff this exceeds -1.
inline double exponential_jump_factor(const JumpDiffusionParams& p) { return pure_investment_proportion(p) * p.eta; }

inline std::vector<double> uniform_grid(double horizon, int steps) {
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  for (int k = 0; k <= steps; ++k) grid[static_cast<std::size_t>(k)] = horizon * k / steps;
  grid.back() = horizon;
  return grid;
}

/// Number of worker threads: MVHEDGE_THREADS if set and positive, otherwise
/// the hardware concurrency.
inline unsigned simulation_threads() {
  unsigned n = 0;
  if (const char* env = std::getenv("MVHEDGE_THREADS")) n = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs body(path) for path in [0, n) on contiguous chunks.
template <class Body>
void parallel_paths(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(simulation_threads(), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> failures(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body, &failure = failures[w]] {
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
}

/// Simulates one path, calling on_step(k, s_before, s_after, jumps) for each
/// step k. Returns the number of redrawn steps.
template <class OnStep>
std::uint64_t simulate_path(const JumpDiffusionParams& p, int steps, std::uint64_t seed, std::uint64_t path,
                            OnStep&& on_step) {
  auto gen = rng::Xoshiro256StarStar::substream(seed, path);
  const double dt = p.horizon / steps;
  const double sqrt_dt = std::sqrt(dt);
  const double drift = p.mu * dt - p.eta * p.alpha * dt;
  const double jump_mean = p.alpha * dt;
  std::uint64_t redraws = 0;
  double s = p.s0;
  for (int k = 0; k < steps; ++k) {
    for (int attempt = 0;; ++attempt) {
      const double xi = gen.normal();
      const int jumps = jump_mean > 0.0 ? gen.poisson(jump_mean) : 0;
      const double factor = 1.0 + drift + p.sigma * sqrt_dt * xi + p.eta * jumps;
      if (factor > 0.0) {
        const double next = s * factor;
        on_step(k, s, next, jumps);
        s = next;
        break;
      }
      ++redraws;
      if (attempt + 1 >= kMaxRedrawsPerStep) throw DomainError("grid too coarse for parameters");
    }
  }
  return redraws;
}

struct PathBatch {
  std::vector<double> grid;
  std::size_t paths = 0;
  std::vector<double> prices;  // paths × (steps + 1), row-major
  std::vector<int> jumps;      // paths × steps, row-major
  std::uint64_t seed = 0;
  std::uint64_t rejections = 0;

  std::size_t steps() const { return grid.size() - 1; }
  double price(std::size_t path, std::size_t k) const { return prices[path * grid.size() + k]; }
  int jump_count(std::size_t path, std::size_t k) const { return jumps[path * steps() + k]; }
};

inline void check_steps_and_paths(int steps, long paths) {
  if (steps < 1) throw DomainError("steps must be at least 1");
  if (paths < 1) throw DomainError("paths must be at least 1");
}

inline void check_rejection_rate(std::uint64_t rejections, std::size_t paths, int steps) {
  const double rate = static_cast<double>(rejections) / (static_cast<double>(paths) * steps);
  if (rate > kMaxRejectionRate) throw DomainError("grid too coarse for parameters");
}

inline PathBatch simulate_paths(const JumpDiffusionParams& params, int steps, long n_paths, std::uint64_t seed) {
  validate(params);
  check_steps_and_paths(steps, n_paths);
  const auto paths = static_cast<std::size_t>(n_paths);
  PathBatch batch;
  batch.grid = uniform_grid(params.horizon, steps);
  batch.paths = paths;
  batch.seed = seed;
  batch.prices.resize(paths * batch.grid.size());
  batch.jumps.resize(paths * static_cast<std::size_t>(steps));
  std::vector<std::uint64_t> redraws(paths, 0);
  parallel_paths(paths, [&](std::size_t i) {
    double* row = batch.prices.data() + i * batch.grid.size();
    int* jump_row = batch.jumps.data() + i * static_cast<std::size_t>(steps);
    row[0] = params.s0;
    redraws[i] = simulate_path(params, steps, seed, i, [&](int k, double, double next, int jumps) {
      row[k + 1] = next;
      jump_row[k] = jumps;
    });
  });
  for (auto r : redraws) batch.rejections += r;
  check_rejection_rate(batch.rejections, paths, steps);
  return batch;
}

struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Sample mean and standard error, summed in index order.
inline Estimate sample_estimate(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

struct PureInvestmentResult {
  double estimate = 0.0;  // E[X_T^2] under the constant-proportion strategy
  double std_error = 0.0;
  double closed_form = 0.0;  // exp(-κT)
  double zero_strategy_estimate = 1.0;
  double zero_strategy_stderr = 0.0;
  double terminal_price_mean = 0.0;
  double terminal_price_stderr = 0.0;
  std::uint64_t rejections = 0;
};

/// Monte-Carlo value of the pure-investment problem min E[(1 + ϑ·S_T)^2]
/// under the optimal feedback X_{k+1} = X_k (1 + c·R_k), c = -μ/(σ²+αη²),
/// R_k the simulated return. Also reports E[S_T] for the moment check.
inline PureInvestmentResult mc_pure_investment(const JumpDiffusionParams& params, int steps, long n_paths,
                                               std::uint64_t seed) {
  validate(params);
  check_steps_and_paths(steps, n_paths);
  if (!(exponential_jump_factor(params) > -1.0)) {
    throw DomainError("optimal exponential jumps to a nonpositive value: -mu*eta/(sigma^2+alpha*eta^2) = " +
                      format_real(exponential_jump_factor(params)) + " <= -1");
  }
  const auto paths = static_cast<std::size_t>(n_paths);
  const double c = pure_investment_proportion(params);
  std::vector<double> squared(paths);
  std::vector<double> terminal(paths);
  std::vector<std::uint64_t> redraws(paths, 0);
  parallel_paths(paths, [&](std::size_t i) {
    double x = 1.0;
    double s_last = params.s0;
    redraws[i] = simulate_path(params, steps, seed, i, [&](int, double before, double after, int) {
      x *= 1.0 + c * (after / before - 1.0);
      s_last = after;
    });
    squared[i] = x * x;
    terminal[i] = s_last;
  });

  PureInvestmentResult out;
  for (auto r : redraws) out.rejections += r;
  check_rejection_rate(out.rejections, paths, steps);
  const auto value = sample_estimate(squared);
  const auto price = sample_estimate(terminal);
  out.estimate = value.mean;
  out.std_error = value.std_error;
  out.closed_form = closed_form_opportunity(params, 0.0);
  out.terminal_price_mean = price.mean;
  out.terminal_price_stderr = price.std_error;
  return out;
}

/// Residual of a candidate (Y, ψ̃ᶜ, ψ̃ᵈ) for the reduced BSDE
///   dY = (ψ̃ᶜσ + αψ̃ᵈη + μY)² / (Y(σ²+αη²) + αψ̃ᵈη²) dt + ψ̃ᶜ dW + ψ̃ᵈ dn,  Y_T = 1,
/// measured on the drift alone: max over cells of |ΔY - generator·Δt|
/// (generator at the left end) plus |Y(T) - 1|.
inline double bsde_residual(const JumpDiffusionParams& p, std::span<const double> grid, std::span<const double> y,
                            std::span<const double> psi_c, std::span<const double> psi_d) {
  validate(p);
  if (grid.size() < 2 || y.size() != grid.size() || psi_c.size() != grid.size() || psi_d.size() != grid.size()) {
    throw DomainError("grid and candidate sizes disagree");
  }
  const double var = variance_rate(p);
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    if (!(y[k] > 0.0)) throw DomainError("candidate must be positive on the grid");
    const double denom = y[k] * var + p.alpha * psi_d[k] * p.eta * p.eta;
    if (!(denom > 0.0)) throw DomainError("degenerate generator: denominator " + format_real(denom) + " <= 0");
    const double num = psi_c[k] * p.sigma + p.alpha * psi_d[k] * p.eta + p.mu * y[k];
    const double generator = num * num / denom;
    const double dt = grid[k + 1] - grid[k];
    worst = std::max(worst, std::abs((y[k + 1] - y[k]) - generator * dt));
  }
  return worst + std::abs(y.back() - 1.0);
}

}  // namespace mvhedge::jd

#endif  // MVHEDGE_JUMP_DIFFUSION_HPP

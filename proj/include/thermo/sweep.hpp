#ifndef THERMO_SWEEP_HPP
#define THERMO_SWEEP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "thermo/hmc.hpp"
#include "thermo/model.hpp"

namespace thermo {

struct BetaGrid {
  std::vector<double> values;
  bool includes_unity = false;
  std::optional<std::size_t> wbic_index;

  std::size_t size() const noexcept { return values.size(); }
};

/// WBIC inverse temperature 1 / log n.
inline double wbic_beta(std::size_t n) {
  if (n < 2) throw std::invalid_argument("wbic_beta: need n >= 2");
  return 1.0 / std::log(static_cast<double>(n));
}

/**
 * K log-spaced points on [beta_min, beta_max], optionally with beta = 1
 * and the WBIC temperature 1/log n merged in.  Points within relative
 * 1e-9 of an existing grid value are not duplicated.
 */
inline BetaGrid make_beta_grid(double beta_min, double beta_max, std::size_t k, std::size_t n,
                               bool include_unity, bool include_wbic) {
  if (!(beta_min > 0.0) || !(beta_max > beta_min) || !std::isfinite(beta_max))
    throw std::invalid_argument("make_beta_grid: need 0 < beta_min < beta_max");
  if (k < 2) throw std::invalid_argument("make_beta_grid: need at least two points");
  BetaGrid g;
  const double lo = std::log(beta_min);
  const double step = (std::log(beta_max) - lo) / static_cast<double>(k - 1);
  for (std::size_t i = 0; i < k; ++i)
    g.values.push_back(i == 0 ? beta_min : i + 1 == k ? beta_max : std::exp(lo + step * static_cast<double>(i)));

  auto insert = [&](double b) {
    auto it = std::lower_bound(g.values.begin(), g.values.end(), b);
    for (auto probe : {it, it == g.values.begin() ? it : it - 1})
      if (probe != g.values.end() && std::abs(*probe - b) <= 1e-9 * b) return;
    g.values.insert(it, b);
  };
  if (include_unity) insert(1.0);
  if (include_wbic) insert(wbic_beta(n));

  auto find = [&](double b) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < g.values.size(); ++i)
      if (std::abs(g.values[i] - b) <= 1e-9 * b) return i;
    return std::nullopt;
  };
  g.includes_unity = find(1.0).has_value();
  if (include_wbic) g.wbic_index = find(wbic_beta(n));
  return g;
}

enum class StartMode { warm, cold };

struct SweepOptions {
  StartMode mode = StartMode::warm;
  /// Also sample the prior (beta = 0), needed for thermodynamic integration.
  bool prior_chain = true;
  /// Worker threads for cold-start sweeps; 0 reads THERMO_THREADS (default 1).
  std::size_t threads = 0;
};

struct SweepResult {
  BetaGrid grid;
  std::vector<ChainOutput> chains;
  std::optional<ChainOutput> prior_chain;
  std::uint64_t seed = 0;
};

inline std::size_t thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("THERMO_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return 1;
}

/// Runs fn(0..count) across workers; the first exception is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= count || error) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

/**
 * One chain per grid temperature in ascending order.  Chain k draws from
 * stream derive_seed(seed, k, 0).  In warm mode, chain k+1 starts from the
 * final state of chain k and from its adapted step size; the step size is
 * then re-adapted.  The prior chain uses stream derive_seed(seed, K, 0).
 * Sampler failures are rethrown annotated with the temperature.
 */
template <StatModel M>
SweepResult run_sweep(const M& model, const typename M::Data& data, const BetaGrid& grid, const HmcConfig& config,
                      const SweepOptions& options = {}) {
  if (grid.values.empty()) throw std::invalid_argument("run_sweep: empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!(grid.values[i] > 0.0) || (i > 0 && !(grid.values[i] > grid.values[i - 1])))
      throw std::invalid_argument("run_sweep: grid must be positive and strictly increasing");

  SweepResult result;
  result.grid = grid;
  result.seed = config.seed;
  result.chains.resize(grid.size());

  auto chain_config = [&](std::size_t k) {
    HmcConfig c = config;
    c.seed = derive_seed(config.seed, k, 0);
    return c;
  };
  auto annotate = [](double beta, const std::exception& e) {
    return SamplerError("chain at beta=" + std::to_string(beta) + " failed: " + e.what());
  };

  if (options.mode == StartMode::warm) {
    std::optional<ParameterVector> state;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      HmcConfig c = chain_config(k);
      if (k > 0) c.init_step = result.chains[k - 1].step_size_final;
      try {
        result.chains[k] = run_chain(model, data, grid.values[k], c, state);
      } catch (const SamplerError& e) {
        throw annotate(grid.values[k], e);
      }
      state = result.chains[k].final_state;
    }
  } else {
    parallel_for(grid.size(), thread_count(options.threads), [&](std::size_t k) {
      try {
        result.chains[k] = run_chain(model, data, grid.values[k], chain_config(k));
      } catch (const SamplerError& e) {
        throw annotate(grid.values[k], e);
      }
    });
  }

  if (options.prior_chain) result.prior_chain = run_chain(model, data, 0.0, chain_config(grid.size()));
  return result;
}

}  // namespace thermo

#endif  // THERMO_SWEEP_HPP

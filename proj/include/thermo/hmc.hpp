#ifndef THERMO_HMC_HPP
#define THERMO_HMC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermo/model.hpp"
#include "thermo/stats.hpp"

// Hamiltonian Monte Carlo on log pi(theta) + beta * l(theta): unit mass
// matrix, fixed number of leapfrog steps, Nesterov dual-averaging step size
// adaptation during warmup (Hoffman & Gelman 2014, section 3.2).

namespace thermo {

struct HmcConfig {
  std::size_t n_warmup = 1000;
  std::size_t n_samples = 2000;
  std::size_t n_leapfrog = 32;
  double target_accept = 0.8;
  double init_step = 0.1;
  std::uint64_t seed = 1;
  bool adapt = true;
  /// Post-warmup step sizes are drawn uniformly from eps * [1 - jitter, 1 + jitter].
  double step_jitter = 0.1;

  void validate() const {
    if (n_samples < 10) throw std::invalid_argument("HmcConfig: n_samples must be >= 10");
    if (!(target_accept >= 0.5 && target_accept <= 0.95))
      throw std::invalid_argument("HmcConfig: target_accept must lie in [0.5, 0.95]");
    if (!(init_step > 0.0) || !std::isfinite(init_step))
      throw std::invalid_argument("HmcConfig: init_step must be positive");
    if (!(step_jitter >= 0.0 && step_jitter < 1.0))
      throw std::invalid_argument("HmcConfig: step_jitter must lie in [0, 1)");
  }
};

/// Row-major n x d sample store.
class SampleMatrix {
public:
  SampleMatrix() = default;
  explicit SampleMatrix(std::size_t dim) : dim_(dim) {}

  void reserve(std::size_t rows) { data_.reserve(rows * dim_); }
  void push_back(ParamView row) { data_.insert(data_.end(), row.begin(), row.end()); }

  std::size_t rows() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  std::size_t dim() const noexcept { return dim_; }
  ParamView row(std::size_t i) const noexcept { return ParamView(data_).subspan(i * dim_, dim_); }

  std::vector<double> column(std::size_t k) const {
    std::vector<double> c(rows());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = data_[i * dim_ + k];
    return c;
  }

  friend bool operator==(const SampleMatrix&, const SampleMatrix&) = default;

private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/**
 * Post-warmup output of one chain at one inverse temperature.  Per-datum
 * log likelihood moments are streamed rather than stored, so memory is
 * O(n) in the dataset size.
 */
struct ChainOutput {
  double beta = 0.0;
  SampleMatrix samples;
  std::vector<double> loglik_series;
  std::vector<MomentAccumulator> pointwise;
  double accept_rate = 0.0;
  double step_size_final = 0.0;
  std::size_t divergences_warmup = 0;
  std::size_t divergences_sampling = 0;
  std::vector<double> ess_by_coordinate;
  ParameterVector final_state;
};

class SamplerError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent stream per (experiment seed, beta index, chain index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t beta_index, std::uint64_t chain_index) noexcept {
  return mix64(mix64(mix64(seed) ^ beta_index) + 0x632be59bd9b4e019ULL * (chain_index + 1));
}

struct LeapfrogResult {
  ParameterVector position;
  std::vector<double> momentum;
  bool divergent = false;
};

namespace detail {

/**
 * In-place leapfrog.  `grad` holds the gradient of the log density at
 * `q` on entry and at the final position on exit.  Returns false as soon
 * as any coordinate becomes non-finite.
 */
template <class GradFn>
bool leapfrog_inplace(std::vector<double>& q, std::vector<double>& p, std::vector<double>& grad,
                      double eps, std::size_t steps, GradFn&& grad_fn) {
  const std::size_t d = q.size();
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t k = 0; k < d; ++k) p[k] += 0.5 * eps * grad[k];
    for (std::size_t k = 0; k < d; ++k) q[k] += eps * p[k];
    for (double v : q)
      if (!std::isfinite(v)) return false;
    try {
      grad = grad_fn(ParamView(q));
    } catch (const std::domain_error&) {
      return false;
    }
    for (std::size_t k = 0; k < d; ++k) p[k] += 0.5 * eps * grad[k];
    for (std::size_t k = 0; k < d; ++k)
      if (!std::isfinite(p[k]) || !std::isfinite(grad[k])) return false;
  }
  return true;
}

}  // namespace detail

/// `steps` leapfrog steps of size eps; grad_fn returns the gradient of the log density.
template <class GradFn>
LeapfrogResult leapfrog(ParamView position, std::span<const double> momentum, double eps, std::size_t steps,
                        GradFn&& grad_fn) {
  if (!(eps > 0.0)) throw std::invalid_argument("leapfrog: step size must be positive");
  LeapfrogResult r;
  std::vector<double> q(position.begin(), position.end());
  r.momentum.assign(momentum.begin(), momentum.end());
  if (steps > 0) {
    std::vector<double> grad = grad_fn(ParamView(q));
    r.divergent = !detail::leapfrog_inplace(q, r.momentum, grad, eps, steps, grad_fn);
  }
  r.position = ParameterVector(std::move(q));
  return r;
}

/// Dual-averaging step size controller.
class DualAverage {
public:
  DualAverage(double init_step, double target, double t0 = 10.0, double gamma = 0.05, double kappa = 0.75)
      : mu_(std::log(10.0 * init_step)), log_step_(std::log(init_step)), target_(target), t0_(t0),
        gamma_(gamma), kappa_(kappa) {}

  void update(double accept_prob) noexcept {
    if (std::isnan(accept_prob)) accept_prob = 0.0;
    ++iteration_;
    const double t = static_cast<double>(iteration_);
    const double w = 1.0 / (t + t0_);
    h_bar_ = (1.0 - w) * h_bar_ + w * (target_ - accept_prob);
    log_step_ = mu_ - std::sqrt(t) / gamma_ * h_bar_;
    const double eta = std::pow(t, -kappa_);
    log_step_bar_ = eta * log_step_ + (1.0 - eta) * log_step_bar_;
  }

  /// Step size to use on the next warmup iteration.
  double step() const noexcept { return std::exp(log_step_); }
  /// Averaged iterate, frozen in after warmup.
  double averaged_step() const noexcept { return iteration_ == 0 ? std::exp(log_step_) : std::exp(log_step_bar_); }

private:
  double mu_;
  double log_step_;
  double log_step_bar_ = 0.0;
  double h_bar_ = 0.0;
  double target_;
  double t0_, gamma_, kappa_;
  std::size_t iteration_ = 0;
};

/**
 * Replays dual averaging over an acceptance-probability history.  Entry t
 * of the result is the step size in force after t updates (entry 0 is
 * init_step).  With adaptation disabled the schedule is constant.
 */
inline std::vector<double> adapt_step_size(std::span<const double> accept_history, double target_accept,
                                           double init_step, bool enabled = true) {
  std::vector<double> schedule{init_step};
  DualAverage da(init_step, target_accept);
  for (double a : accept_history) {
    if (enabled) da.update(a);
    schedule.push_back(enabled ? da.step() : init_step);
  }
  return schedule;
}

namespace detail {

template <StatModel M>
struct TemperedTarget {
  const M& model;
  const typename M::Data& data;
  double beta;

  struct Eval {
    double log_prior = 0.0;
    double loglik = 0.0;
    double beta = 0.0;
    double log_density() const noexcept { return beta == 0.0 ? log_prior : log_prior + beta * loglik; }
  };

  Eval evaluate(ParamView q) const {
    Eval e{model.log_prior(q), model.loglik_total(q, data), beta};
    return e;
  }
  std::vector<double> gradient(ParamView q) const { return grad_log_tempered(model, q, beta, data); }
};

inline double kinetic(const std::vector<double>& p) {
  double s = 0.0;
  for (double v : p) s += v * v;
  return 0.5 * s;
}

/// Double or halve eps until the one-step acceptance crosses 1/2.
template <StatModel M>
double initial_step(const TemperedTarget<M>& target, ParamView q0, double eps, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto e0 = target.evaluate(q0);
  std::vector<double> p(q0.size());
  auto log_accept = [&](double step) {
    for (auto& v : p) v = normal(rng);
    const double h0 = -e0.log_density() + kinetic(p);
    std::vector<double> q(q0.begin(), q0.end());
    std::vector<double> grad = target.gradient(q0);
    std::vector<double> pp = p;
    if (!leapfrog_inplace(q, pp, grad, step, 1, [&](ParamView x) { return target.gradient(x); }))
      return -std::numeric_limits<double>::infinity();
    const double h1 = -target.evaluate(q).log_density() + kinetic(pp);
    return std::isfinite(h1) ? h0 - h1 : -std::numeric_limits<double>::infinity();
  };
  const double half = std::log(0.5);
  const double direction = log_accept(eps) > half ? 1.0 : -1.0;
  for (int it = 0; it < 60; ++it) {
    const double next = direction > 0 ? eps * 2.0 : eps * 0.5;
    const double la = log_accept(next);
    if ((direction > 0 && !(la > half)) || (direction < 0 && la > half)) return direction > 0 ? eps : next;
    eps = next;
  }
  return eps;
}

}  // namespace detail

/**
 * One Metropolis-corrected HMC chain at inverse temperature beta.
 *
 * Momenta are refreshed from N(0, I) every iteration.  Trajectories with a
 * non-finite or exploding Hamiltonian (energy error > 1000) count as
 * divergent and are rejected.  Warmup iterations are discarded; if more
 * than half of them diverge the chain aborts with SamplerError.
 * Without `init` the chain starts from a prior draw on its own stream.
 */
template <StatModel M>
ChainOutput run_chain(const M& model, const typename M::Data& data, double beta, const HmcConfig& config,
                      std::optional<ParameterVector> init = std::nullopt) {
  config.validate();
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("run_chain: beta must be finite and >= 0");
  const std::size_t d = model.dimension();
  Rng rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const detail::TemperedTarget<M> target{model, data, beta};
  auto grad_fn = [&](ParamView x) { return target.gradient(x); };

  std::vector<double> q = init ? init->values() : model.sample_prior(rng).values();
  if (q.size() != d) throw std::invalid_argument("run_chain: initial state has wrong dimension");
  auto current = target.evaluate(q);
  if (!std::isfinite(current.log_density())) throw SamplerError("run_chain: non-finite log density at initial state");
  std::vector<double> grad = target.gradient(q);

  double eps = config.init_step;
  if (config.adapt && d > 0 && config.n_warmup > 0) eps = detail::initial_step(target, q, eps, rng);
  DualAverage da(eps, config.target_accept);

  ChainOutput out;
  out.beta = beta;
  out.samples = SampleMatrix(d);
  out.samples.reserve(config.n_samples);
  out.loglik_series.reserve(config.n_samples);
  out.pointwise.assign(data.size(), MomentAccumulator{});

  std::vector<double> p(d), q_new, p_new, grad_new;
  std::size_t accepted = 0;
  const std::size_t total = config.n_warmup + config.n_samples;
  for (std::size_t it = 0; it < total; ++it) {
    const bool warmup = it < config.n_warmup;
    double step = eps;
    if (warmup && config.adapt) {
      step = da.step();
    } else if (!warmup && config.step_jitter > 0.0) {
      step = eps * (1.0 + config.step_jitter * (2.0 * unif(rng) - 1.0));
    }

    for (auto& v : p) v = normal(rng);
    const double h0 = -current.log_density() + detail::kinetic(p);
    q_new = q;
    p_new = p;
    grad_new = grad;
    bool divergent = !detail::leapfrog_inplace(q_new, p_new, grad_new, step, config.n_leapfrog, grad_fn);
    double accept_prob = 0.0;
    typename detail::TemperedTarget<M>::Eval proposal{};
    if (!divergent) {
      try {
        proposal = target.evaluate(q_new);
      } catch (const std::domain_error&) {
        divergent = true;
      }
    }
    if (!divergent) {
      const double h1 = -proposal.log_density() + detail::kinetic(p_new);
      if (!std::isfinite(h1) || h1 - h0 > 1000.0)
        divergent = true;
      else
        accept_prob = std::min(1.0, std::exp(h0 - h1));
    }
    if (divergent) ++(warmup ? out.divergences_warmup : out.divergences_sampling);

    const bool accept = !divergent && unif(rng) < accept_prob;
    if (accept) {
      q.swap(q_new);
      grad.swap(grad_new);
      current = proposal;
    }

    if (warmup) {
      if (config.adapt) da.update(accept_prob);
      if (it + 1 == config.n_warmup) {
        if (2 * out.divergences_warmup > config.n_warmup)
          throw SamplerError("run_chain: " + std::to_string(out.divergences_warmup) + " of " +
                             std::to_string(config.n_warmup) + " warmup trajectories diverged at beta=" +
                             std::to_string(beta));
        if (config.adapt) eps = da.averaged_step();
      }
      continue;
    }

    if (accept) ++accepted;
    out.samples.push_back(q);
    out.loglik_series.push_back(current.loglik);
    for (std::size_t i = 0; i < data.size(); ++i) out.pointwise[i].add(model.loglik_point(q, i, data));
  }

  out.accept_rate = static_cast<double>(accepted) / static_cast<double>(config.n_samples);
  out.step_size_final = eps;
  out.final_state = ParameterVector(q);
  out.ess_by_coordinate.resize(d);
  for (std::size_t k = 0; k < d; ++k) out.ess_by_coordinate[k] = effective_sample_size(out.samples.column(k)).ess;
  return out;
}

}  // namespace thermo

#endif  // THERMO_HMC_HPP

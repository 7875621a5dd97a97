#ifndef THERMO_RESPONSE_HPP
#define THERMO_RESPONSE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermo/hmc.hpp"
#include "thermo/model.hpp"
#include "thermo/observables.hpp"
#include "thermo/stats.hpp"
#include "thermo/sweep.hpp"

namespace thermo {

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

/// Observable evaluated on every stored sample.
template <StatModel M>
std::vector<double> observable_series(const ChainOutput& chain, const M& model, const typename M::Data& data,
                                      const Observable<M>& obs) {
  std::vector<double> out(chain.samples.rows());
  for (std::size_t t = 0; t < out.size(); ++t) out[t] = eval_observable(obs, chain.samples.row(t), model, data);
  return out;
}

/// Sample mean with its Monte Carlo error sqrt(var / ESS).
inline Estimate order_parameter(std::span<const double> series) {
  const auto ess = effective_sample_size(series);
  const double var = variance(series);
  return {mean(series), var > 0.0 ? std::sqrt(var / ess.ess) : 0.0};
}

template <StatModel M>
Estimate order_parameter(const ChainOutput& chain, const M& model, const typename M::Data& data,
                         const Observable<M>& obs) {
  return order_parameter(observable_series(chain, model, data, obs));
}

/// chi = beta * Var(f).
inline double susceptibility(std::span<const double> series, double beta) { return beta * variance(series); }

/// Var(l) over the chain; zero when the log likelihood is constant.
inline double heat_capacity(const ChainOutput& chain) { return variance(chain.loglik_series); }

struct WaicComplexity {
  double p_waic = 0.0;
  double waic_transform = 0.0;  ///< log(1 + p_waic / n)
};

/// Sum over data points of the posterior variance of log p(x_i | theta).
inline WaicComplexity waic_complexity(const ChainOutput& chain) {
  WaicComplexity w;
  if (chain.pointwise.empty()) return w;
  for (const auto& acc : chain.pointwise) w.p_waic += acc.variance();
  w.waic_transform = std::log1p(w.p_waic / static_cast<double>(chain.pointwise.size()));
  return w;
}

/// E[-l] at beta = 1/log n.
inline double wbic(const ChainOutput& chain, std::size_t n) {
  if (std::abs(chain.beta - wbic_beta(n)) > 1e-9)
    throw std::invalid_argument("wbic: chain temperature " + std::to_string(chain.beta) + " is not 1/log n");
  return -mean(chain.loglik_series);
}

/// Two-temperature slope of E_beta[-l] in 1/beta.
inline double rlct_estimate(double beta1, double mean_neg_loglik1, double beta2, double mean_neg_loglik2) {
  if (!(beta1 > 0.0) || !(beta2 > 0.0) || beta1 == beta2)
    throw std::invalid_argument("rlct_estimate: need two distinct positive temperatures");
  return (mean_neg_loglik1 - mean_neg_loglik2) / (1.0 / beta1 - 1.0 / beta2);
}

namespace detail {
inline const ChainOutput& chain_at(const SweepResult& sweep, double beta) {
  for (const auto& c : sweep.chains)
    if (std::abs(c.beta - beta) <= 1e-9 * beta) return c;
  throw std::invalid_argument("no chain sampled at beta=" + std::to_string(beta));
}
}  // namespace detail

inline double rlct_estimate(const SweepResult& sweep, double beta1, double beta2) {
  const auto& c1 = detail::chain_at(sweep, beta1);
  const auto& c2 = detail::chain_at(sweep, beta2);
  return rlct_estimate(c1.beta, -mean(c1.loglik_series), c2.beta, -mean(c2.loglik_series));
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds() const noexcept { return lhs <= rhs; }
};

/// |Cov(f, l)| against sqrt(Var f * Var l) from the same centered sums.
inline BoundCheck response_speed_bound_check(std::span<const double> f, std::span<const double> loglik) {
  return {std::abs(covariance(f, loglik)), std::sqrt(variance(f) * variance(loglik))};
}

/// Running count of response-speed bound checks.
struct BoundTally {
  std::size_t count = 0;
  std::size_t violations = 0;
  double equality_gap = 0.0;  ///< worst relative rhs - lhs over f = l
};

/// Checks the bound for every shipped observable of `model` on one chain.
template <StatModel M>
void tally_response_bounds(BoundTally& t, const M& model, const typename M::Data& data, const ChainOutput& chain) {
  for (const auto& obs : shipped_observables(model)) {
    const auto series = observable_series(chain, model, data, obs);
    const auto b = response_speed_bound_check(series, chain.loglik_series);
    ++t.count;
    if (!b.holds()) ++t.violations;
    if (obs.name == "loglik" && b.rhs > 0.0) t.equality_gap = std::max(t.equality_gap, (b.rhs - b.lhs) / b.rhs);
  }
}

struct IdentityReport {
  double beta = 0.0;
  double fd_derivative = 0.0;
  double covariance = 0.0;
  double residual = 0.0;
  double mc_se = 0.0;
};

/**
 * Sampled check of d/dbeta E[f] = Cov(f, l): the central difference comes
 * from independent chains at beta(1-h) and beta(1+h), the covariance from
 * the chain at beta.  mc_se combines the ESS-based errors of both sides.
 */
inline IdentityReport identity_from_series(double beta, double h, std::span<const double> f_center,
                                           std::span<const double> loglik_center, std::span<const double> f_minus,
                                           std::span<const double> f_plus) {
  if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("identity check: h must lie in (0, 1)");
  IdentityReport r;
  r.beta = beta;
  const double db = 2.0 * beta * h;
  const auto lo = order_parameter(f_minus);
  const auto hi = order_parameter(f_plus);
  r.fd_derivative = (hi.value - lo.value) / db;
  r.covariance = covariance(f_center, loglik_center);
  r.residual = r.fd_derivative - r.covariance;

  const double mf = mean(f_center);
  const double ml = mean(loglik_center);
  std::vector<double> prod(f_center.size());
  for (std::size_t t = 0; t < prod.size(); ++t) prod[t] = (f_center[t] - mf) * (loglik_center[t] - ml);
  const double pv = variance(prod);
  const double se_cov = pv > 0.0 ? std::sqrt(pv / effective_sample_size(prod).ess) : 0.0;
  const double se_fd = std::sqrt(lo.se * lo.se + hi.se * hi.se) / db;
  r.mc_se = std::sqrt(se_fd * se_fd + se_cov * se_cov);
  return r;
}

/**
 * Runs the two side chains (streams derive_seed(config.seed, 1 | 2, 0),
 * started from the centre chain's final state) and compares against
 * `center`.
 */
template <StatModel M>
IdentityReport covariance_identity_check(const M& model, const typename M::Data& data, const Observable<M>& obs,
                                         const ChainOutput& center, double h, const HmcConfig& config) {
  const double beta = center.beta;
  HmcConfig lo_cfg = config, hi_cfg = config;
  lo_cfg.seed = derive_seed(config.seed, 1, 0);
  hi_cfg.seed = derive_seed(config.seed, 2, 0);
  lo_cfg.init_step = hi_cfg.init_step = center.step_size_final;
  const auto lo = run_chain(model, data, beta * (1.0 - h), lo_cfg, center.final_state);
  const auto hi = run_chain(model, data, beta * (1.0 + h), hi_cfg, center.final_state);
  return identity_from_series(beta, h, observable_series(center, model, data, obs), center.loglik_series,
                              observable_series(lo, model, data, obs), observable_series(hi, model, data, obs));
}

/// Samples the centre chain too (stream derive_seed(config.seed, 0, 0)).
template <StatModel M>
IdentityReport covariance_identity_check(const M& model, const typename M::Data& data, const Observable<M>& obs,
                                         double beta, double h, const HmcConfig& config,
                                         std::optional<ParameterVector> init = std::nullopt) {
  HmcConfig c = config;
  c.seed = derive_seed(config.seed, 0, 0);
  const auto center = run_chain(model, data, beta, c, std::move(init));
  return covariance_identity_check(model, data, obs, center, h, config);
}

/**
 * Grid temperatures used for identity checks: `count` interior points at
 * evenly spaced index fractions k / (count + 1), k = 1..count.
 */
inline std::vector<double> identity_temperatures(const BetaGrid& grid, std::size_t count = 5) {
  if (grid.size() < count + 2) throw std::invalid_argument("identity_temperatures: grid too small");
  std::vector<double> out;
  const double last = static_cast<double>(grid.size() - 1);
  for (std::size_t k = 1; k <= count; ++k)
    out.push_back(grid.values[static_cast<std::size_t>(std::lround(static_cast<double>(k) * last / static_cast<double>(count + 1)))]);
  return out;
}

/**
 * log Z(beta_k) by trapezoidal integration of E_b[l] from b = 0, using the
 * prior chain for E_0[l].  log Z(0) = 0 because the prior is normalized.
 */
inline std::vector<double> log_partition_curve(const SweepResult& sweep) {
  if (!sweep.prior_chain) throw std::invalid_argument("log_partition_curve: sweep has no prior (beta = 0) chain");
  std::vector<double> out(sweep.chains.size());
  double prev_beta = 0.0;
  double prev_mean = mean(sweep.prior_chain->loglik_series);
  double acc = 0.0;
  for (std::size_t k = 0; k < sweep.chains.size(); ++k) {
    const double b = sweep.chains[k].beta;
    const double m = mean(sweep.chains[k].loglik_series);
    acc += 0.5 * (b - prev_beta) * (prev_mean + m);
    out[k] = acc;
    prev_beta = b;
    prev_mean = m;
  }
  return out;
}

struct ResponseRow {
  double beta = 0.0;
  double m = 0.0;
  double m_se = 0.0;
  double chi = 0.0;
  double heat_capacity = 0.0;
  double p_waic = 0.0;
  double waic_transform = 0.0;
  double logZ = 0.0;
  double free_energy = 0.0;
  double ess = 0.0;
  double accept_rate = 0.0;
};

struct ResponseCurve {
  std::vector<ResponseRow> rows;
};

/// Per-temperature response table for one order-parameter observable.
template <StatModel M>
ResponseCurve build_response_curve(const M& model, const typename M::Data& data, const SweepResult& sweep,
                                   const Observable<M>& obs) {
  ResponseCurve curve;
  std::vector<double> log_z(sweep.chains.size(), std::numeric_limits<double>::quiet_NaN());
  if (sweep.prior_chain) log_z = log_partition_curve(sweep);
  for (std::size_t k = 0; k < sweep.chains.size(); ++k) {
    const auto& chain = sweep.chains[k];
    const auto series = observable_series(chain, model, data, obs);
    const auto est = order_parameter(series);
    const auto waic = waic_complexity(chain);
    ResponseRow row;
    row.beta = chain.beta;
    row.m = est.value;
    row.m_se = est.se;
    row.chi = susceptibility(series, chain.beta);
    row.heat_capacity = heat_capacity(chain);
    row.p_waic = waic.p_waic;
    row.waic_transform = waic.waic_transform;
    row.logZ = log_z[k];
    row.free_energy = -log_z[k] / chain.beta;
    row.ess = effective_sample_size(series).ess;
    row.accept_rate = chain.accept_rate;
    curve.rows.push_back(row);
  }
  return curve;
}

struct SusceptibilityPeak {
  std::size_t index = 0;
  double beta = 0.0;
  double chi = 0.0;
};

/// Row of maximal chi; ties go to the smaller beta.
inline SusceptibilityPeak find_susceptibility_peak(const ResponseCurve& curve) {
  if (curve.rows.empty()) throw std::invalid_argument("find_susceptibility_peak: empty curve");
  SusceptibilityPeak p{0, curve.rows[0].beta, curve.rows[0].chi};
  for (std::size_t k = 1; k < curve.rows.size(); ++k)
    if (curve.rows[k].chi > p.chi) p = {k, curve.rows[k].beta, curve.rows[k].chi};
  return p;
}

/**
 * Chain with every sample replaced by transform(sample); log likelihood
 * series and per-datum moments are recomputed from the new samples.
 */
template <StatModel M>
ChainOutput transform_chain(const M& model, const typename M::Data& data, const ChainOutput& chain,
                            const std::function<ParameterVector(ParamView)>& transform) {
  ChainOutput out;
  out.beta = chain.beta;
  out.accept_rate = chain.accept_rate;
  out.step_size_final = chain.step_size_final;
  out.divergences_warmup = chain.divergences_warmup;
  out.divergences_sampling = chain.divergences_sampling;
  out.ess_by_coordinate = chain.ess_by_coordinate;
  out.final_state = transform(chain.final_state);
  out.samples = SampleMatrix(chain.samples.dim());
  out.pointwise.assign(data.size(), MomentAccumulator{});
  for (std::size_t t = 0; t < chain.samples.rows(); ++t) {
    const auto moved = transform(chain.samples.row(t));
    out.samples.push_back(moved);
    out.loglik_series.push_back(model.loglik_total(moved, data));
    for (std::size_t i = 0; i < data.size(); ++i) out.pointwise[i].add(model.loglik_point(moved, i, data));
  }
  return out;
}

}  // namespace thermo

#endif  // THERMO_RESPONSE_HPP

#ifndef THERMO_VALIDATION_HPP
#define THERMO_VALIDATION_HPP

// Oracle and invariance suite behind `thermo validate`.  Each check_*
// function appends named measurements to a Report, so the acceptance
// runner can reuse them at larger sizes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "thermo/experiment.hpp"
#include "thermo/quadrature.hpp"

namespace thermo::validation {

struct Check {
  std::string group;
  std::string name;
  double measured = 0.0;
  std::string relation;  ///< how measured compares with the tolerance, e.g. "<=" or "in"
  std::string tolerance;
  bool passed = false;
};

class Report {
public:
  std::vector<Check> checks;
  BoundTally bounds;

  void add(std::string group, std::string name, double measured, std::string relation, std::string tolerance,
           bool passed) {
    checks.push_back({std::move(group), std::move(name), measured, std::move(relation), std::move(tolerance), passed});
  }

  /// measured <= limit
  void at_most(const std::string& group, const std::string& name, double measured, double limit) {
    add(group, name, measured, "<=", format_number(limit), measured <= limit);
  }

  /// lo <= measured <= hi
  void within(const std::string& group, const std::string& name, double measured, double lo, double hi) {
    add(group, name, measured, "in", "[" + format_number(lo) + ", " + format_number(hi) + "]",
        measured >= lo && measured <= hi);
  }

  std::size_t failures() const {
    return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.passed; }));
  }

  bool group_passed(const std::string& group) const {
    return std::all_of(checks.begin(), checks.end(), [&](const Check& c) { return c.group != group || c.passed; });
  }

  bool passed() const { return failures() == 0; }

  std::string table() const {
    std::size_t gw = 5, nw = 5;
    for (const auto& c : checks) {
      gw = std::max(gw, c.group.size());
      nw = std::max(nw, c.name.size());
    }
    std::ostringstream out;
    out << std::left << std::setw(6) << "" << std::setw(static_cast<int>(gw) + 2) << "group"
        << std::setw(static_cast<int>(nw) + 2) << "check" << std::setw(14) << "measured"
        << "tolerance\n";
    for (const auto& c : checks) {
      std::ostringstream m;
      m << std::setprecision(6) << c.measured;
      out << std::setw(6) << (c.passed ? "PASS" : "FAIL") << std::setw(static_cast<int>(gw) + 2) << c.group
          << std::setw(static_cast<int>(nw) + 2) << c.name << std::setw(14) << m.str() << c.relation << " "
          << c.tolerance << "\n";
    }
    return out.str();
  }
};

/// Conjugate model whose likelihood gradient is scaled by 1.1; exists only to prove the gradient check bites.
struct FaultyGradientModel : ConjugateGaussianModel {
  using ConjugateGaussianModel::ConjugateGaussianModel;
  std::vector<double> grad_loglik_total(ParamView theta, const Data& data) const {
    auto g = ConjugateGaussianModel::grad_loglik_total(theta, data);
    for (auto& v : g) v *= 1.1;
    return g;
  }
};

namespace detail {

inline HmcConfig sampler(std::uint64_t seed, std::size_t samples, std::size_t warmup = 1000) {
  HmcConfig c;
  c.seed = seed;
  c.n_samples = samples;
  c.n_warmup = warmup;
  return c;
}

/// sqrt(Var / ESS) of the centred squares, the MC error of a sample variance.
inline double variance_se(std::span<const double> x, double centre) {
  std::vector<double> sq(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) sq[t] = (x[t] - centre) * (x[t] - centre);
  const double v = variance(sq);
  return v > 0.0 ? std::sqrt(v / effective_sample_size(sq).ess) : 0.0;
}

}  // namespace detail

/// Worst finite-difference gradient error over `draws` prior samples.
template <StatModel M>
void check_gradients(Report& r, const std::string& label, const M& model, const typename M::Data& data,
                     std::uint64_t seed, std::size_t draws = 20) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < draws; ++k) worst = std::max(worst, check_gradient(model, model.sample_prior(rng), data, 1e-5));
  r.at_most("gradient", label, worst, 1e-5);
}

/**
 * Invariant observables over 100 prior draws and p_WAIC over a short chain
 * whose samples each receive a random declared gauge, 100 times.
 */
template <StatModel M>
void check_gauge_invariance(Report& r, const M& model, const typename M::Data& data, std::uint64_t seed,
                            std::size_t transforms = 100, std::size_t chain_samples = 200) {
  Rng rng(seed);
  std::vector<ParameterVector> thetas;
  for (std::size_t k = 0; k < transforms; ++k) thetas.push_back(model.sample_prior(rng));
  for (const auto& obs : shipped_observables(model))
    if (obs.invariant)
      r.at_most("gauge", model.name() + "/" + obs.name, check_invariance(obs, model, data, thetas, 1, rng), 1e-9);

  const auto chain = run_chain(model, data, 1.0, detail::sampler(seed, chain_samples, 300));
  tally_response_bounds(r.bounds, model, data, chain);
  const double base = waic_complexity(chain).p_waic;
  const std::size_t gauges = model.gauge_names().size();
  double worst = 0.0;
  for (std::size_t k = 0; k < transforms; ++k) {
    const auto moved = transform_chain(model, data, chain, [&](ParamView t) {
      const std::size_t g = gauges > 1 ? 1 + rng() % (gauges - 1) : 0;
      return apply_gauge(model, t, g, rng);
    });
    worst = std::max(worst, std::abs(waic_complexity(moved).p_waic - base));
  }
  r.at_most("gauge", model.name() + "/p_waic", worst, 1e-9);
}

/// Quadrature against closed forms and the mixture's exact symmetry.
inline void check_quadrature(Report& r) {
  for (std::size_t d : {1, 2}) {
    const ConjugateGaussianModel m(d);
    const auto data = m.simulate(std::vector<double>(d, 0.8), 15, 3);
    double worst = 0.0, norm = 0.0;
    for (double beta : {0.0, 0.3, 1.0, 2.5}) {
      const auto mom = conjugate_tempered_moments(m, data, beta);
      QuadratureSpec spec = symmetric_spec(d, beta, 1.0, d == 1 ? 4001 : 401);
      for (std::size_t k = 0; k < d; ++k) spec.bounds[k] = {mom.mean[k] - 12.0, mom.mean[k] + 12.0};
      norm = std::max(norm, std::abs(grid_expectation(m, data, [](ParamView) { return 1.0; }, spec).value - 1.0));
      for (std::size_t k = 0; k < d; ++k) {
        const double mk = mom.mean[k];
        worst = std::max(worst, std::abs(grid_expectation(m, data, [k](ParamView t) { return t[k]; }, spec).value - mk));
        const auto second = grid_expectation(m, data, [k, mk](ParamView t) { return (t[k] - mk) * (t[k] - mk); }, spec);
        worst = std::max(worst, std::abs(second.value - mom.variance));
      }
      worst = std::max(worst, std::abs(grid_expectation(m, data, [](ParamView) { return 0.0; }, spec).log_normalizer -
                                        conjugate_log_partition(m, data, beta)));
    }
    r.at_most("quadrature", "normalization d=" + std::to_string(d), norm, 1e-12);
    r.at_most("quadrature", "conjugate moments d=" + std::to_string(d), worst, 1e-8);
  }
  const MixtureModel mix;
  const auto data = mix.simulate(1.5, 200, 5);
  double worst = 0.0;
  for (double beta : {0.01, 0.1, 1.0, 3.0})
    worst = std::max(worst,
                     std::abs(grid_expectation(mix, data, [](ParamView t) { return t[0]; }, symmetric_spec(1, beta, 3.0, 8001)).value));
  r.at_most("quadrature", "mixture E[mu] symmetry", worst, 1e-10);
}

/**
 * Noise-free identity residuals at h = 1e-3 and their decay ratio between
 * h = 2e-2 and 1e-2.  The conjugate set (n = 3, mean 1) is checked at every
 * grid temperature; the mixture at the identity temperatures.
 */
inline void check_quadrature_identity(Report& r) {
  auto decay = [](const auto& model, const auto& data, const auto& f, double beta, QuadratureSpec spec) {
    const double a = quadrature_identity_check(model, data, f, beta, 2e-2, spec).residual;
    const double b = quadrature_identity_check(model, data, f, beta, 1e-2, spec).residual;
    return a / b;
  };
  const ConjugateGaussianModel conj(1);
  const ConjugateGaussianModel::Data cdata(1, {0.5, 1.0, 1.5});
  const auto theta = [](ParamView t) { return t[0]; };
  const auto cgrid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, cdata.size(), true, true);
  double worst = 0.0, rlo = 1e300, rhi = -1e300;
  for (double beta : cgrid.values) {
    const auto spec = symmetric_spec(1, beta, 1.0, 4001, 1.0);
    worst = std::max(worst, std::abs(quadrature_identity_check(conj, cdata, theta, beta, 1e-3, spec).residual));
    const double ratio = decay(conj, cdata, theta, beta, spec);
    rlo = std::min(rlo, ratio);
    rhi = std::max(rhi, ratio);
  }
  r.at_most("identity", "conjugate quadrature |residual| h=1e-3", worst, 1e-6);
  r.within("identity", "conjugate quadrature decay ratio min", rlo, 3.8, 4.2);
  r.within("identity", "conjugate quadrature decay ratio max", rhi, 3.8, 4.2);

  const MixtureModel mix;
  const auto mdata = mix.simulate(1.5, 200, 5);
  const auto abs_mu = [](ParamView t) { return std::abs(t[0]); };
  const auto mgrid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, mdata.size(), true, true);
  worst = 0.0;
  rlo = 1e300;
  rhi = -1e300;
  for (double beta : identity_temperatures(mgrid)) {
    const auto spec = symmetric_spec(1, beta, 3.0, 8001);
    worst = std::max(worst, std::abs(quadrature_identity_check(mix, mdata, abs_mu, beta, 1e-3, spec).residual));
    const double ratio = decay(mix, mdata, abs_mu, beta, spec);
    rlo = std::min(rlo, ratio);
    rhi = std::max(rhi, ratio);
  }
  r.at_most("identity", "mixture quadrature |residual| h=1e-3", worst, 1e-6);
  r.within("identity", "mixture quadrature decay ratio min", rlo, 3.8, 4.2);
  r.within("identity", "mixture quadrature decay ratio max", rhi, 3.8, 4.2);
}

/// Sampled identity: |residual| / mc_se at the 5 identity temperatures of a default-style grid.
template <StatModel M>
void check_sampled_identity(Report& r, const std::string& label, const M& model, const typename M::Data& data,
                            const Observable<M>& obs, std::uint64_t seed, std::size_t samples) {
  const auto grid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, data.size(), true, true);
  double worst = 0.0;
  std::size_t k = 0;
  for (double beta : identity_temperatures(grid)) {
    const auto rep = covariance_identity_check(model, data, obs, beta, 0.05, detail::sampler(derive_seed(seed, k++, 0), samples));
    worst = std::max(worst, std::abs(rep.residual) / rep.mc_se);
  }
  r.at_most("identity", label + " sampled |residual|/mc_se", worst, 3.0);
}

/// Trapezoidal log Z against the closed form, and its curvature against Var(l).
inline void check_log_partition(Report& r, std::uint64_t seed, std::size_t curvature_k, std::size_t curvature_samples) {
  {
    const ConjugateGaussianModel m(1);
    const auto data = m.simulate(std::vector<double>{1.0}, 20, 11);
    const auto grid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, 20, true, true);
    const auto sweep = run_sweep(m, data, grid, detail::sampler(seed, 4000));
    for (const auto& c : sweep.chains) tally_response_bounds(r.bounds, m, data, c);
    const auto lz = log_partition_curve(sweep);
    double worst = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double exact = conjugate_log_partition(m, data, grid.values[k]);
      worst = std::max(worst, std::abs(lz[k] - exact) / std::abs(exact));
    }
    r.at_most("log_partition", "conjugate log Z relative error", worst, 0.01);
  }
  // Relative noise of the curvature falls like 1/sqrt(d), hence d = 4.
  const ConjugateGaussianModel m(4);
  const auto data = m.simulate(std::vector<double>(4, 0.8), 20, 13);
  const auto grid = make_beta_grid(0.05, std::pow(10.0, 0.5), curvature_k, 20, false, false);
  const auto sweep = run_sweep(m, data, grid, detail::sampler(seed + 1, curvature_samples));
  const auto curvature = nonuniform_second_derivative(grid.values, log_partition_curve(sweep));
  double worst = 0.0;
  for (std::size_t k = 1; k + 1 < grid.size(); ++k)
    worst = std::max(worst, std::abs(curvature[k] / heat_capacity(sweep.chains[k]) - 1.0));
  r.at_most("log_partition", "curvature vs Var(l) relative error", worst, 0.05);
}

/// lambda = d/2 and p_WAIC = d on regular conjugate models.
inline void check_regular_constants(Report& r, std::uint64_t seed, std::size_t samples) {
  {
    const ConjugateGaussianModel m(2);
    const std::size_t n = 1000;
    const auto data = m.simulate(std::vector<double>{0.3, -0.2}, n, 9);
    const double bn = wbic_beta(n);
    BetaGrid grid;
    grid.values = {bn / 1.5, bn * 1.5};
    const auto sweep = run_sweep(m, data, grid, detail::sampler(seed, samples), {.prior_chain = false});
    for (const auto& c : sweep.chains) tally_response_bounds(r.bounds, m, data, c);
    r.within("regular", "rlct d=2 n=1000", rlct_estimate(sweep, grid.values[0], grid.values[1]), 0.85, 1.15);
  }
  const ConjugateGaussianModel m(3);
  const auto data = m.simulate(std::vector<double>{0.5, -0.5, 1.0}, 500, 6);
  const auto chain = run_chain(m, data, 1.0, detail::sampler(seed + 1, samples));
  tally_response_bounds(r.bounds, m, data, chain);
  r.within("regular", "p_waic d=3 n=500", waic_complexity(chain).p_waic, 2.55, 3.45);
}

/// WBIC against the exact -log Z(1).
inline void check_wbic(Report& r, std::uint64_t seed) {
  const ConjugateGaussianModel m(1);
  const std::size_t n = 100;
  const auto data = m.simulate(std::vector<double>{0.7}, n, 8);
  const auto chain = run_chain(m, data, wbic_beta(n), detail::sampler(seed, 4000));
  tally_response_bounds(r.bounds, m, data, chain);
  const double exact = -conjugate_log_partition(m, data, 1.0);
  r.at_most("wbic", "|wbic / -log Z(1) - 1| d=1 n=100", std::abs(wbic(chain, n) / exact - 1.0), 0.2);
}

/// Sampler moments on Gaussian targets, leapfrog reversibility and rerun determinism.
inline void check_sampler(Report& r, std::uint64_t seed) {
  const ConjugateGaussianModel m(2);
  const auto data = m.simulate(std::vector<double>{1.0, -0.5}, 30, 2);
  double worst = 0.0;
  std::uint64_t s = seed;
  for (double beta : {0.0, 0.5, 1.0}) {
    const auto chain = run_chain(m, data, beta, detail::sampler(s++, 4000));
    tally_response_bounds(r.bounds, m, data, chain);
    const auto mom = conjugate_tempered_moments(m, data, beta);
    for (std::size_t k = 0; k < 2; ++k) {
      const auto col = chain.samples.column(k);
      const double se_m = std::sqrt(mom.variance / effective_sample_size(col).ess);
      worst = std::max(worst, std::abs(mean(col) - mom.mean[k]) / se_m);
      std::vector<double> sq(col.size());
      for (std::size_t t = 0; t < col.size(); ++t) sq[t] = (col[t] - mom.mean[k]) * (col[t] - mom.mean[k]);
      worst = std::max(worst, std::abs(mean(sq) - mom.variance) / detail::variance_se(col, mom.mean[k]));
    }
  }
  r.at_most("sampler", "Gaussian moments |error|/se", worst, 3.0);

  const TwoLayerNetModel nn(3);
  const TwoLayerNetModel teacher(3, nn.noise_sd());
  const auto ndata = nn.simulate(teacher, TwoLayerNetModel::pack({1.5, -1.0, 1.0}, {1.0, -1.5, 2.0}, {0.0, 0.5, -0.5}, 0.2), 20, 7);
  auto grad = [&](ParamView q) { return grad_log_tempered(nn, q, 1.0, ndata); };
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  double rev = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> q(nn.dimension()), p(nn.dimension());
    for (auto& v : q) v = z(rng);
    for (auto& v : p) v = z(rng);
    const auto fwd = leapfrog(ParamView(q), p, 0.005, 25, grad);
    auto back_p = fwd.momentum;
    for (auto& v : back_p) v = -v;
    const auto back = leapfrog(ParamView(fwd.position), back_p, 0.005, 25, grad);
    for (std::size_t k = 0; k < q.size(); ++k)
      rev = std::max({rev, std::abs(back.position[k] - q[k]), std::abs(back.momentum[k] + p[k])});
  }
  r.at_most("sampler", "leapfrog reversibility", rev, 1e-10);

  auto cfg = default_config("mixture");
  cfg.n = 50;
  cfg.grid.k = 4;
  cfg.sampler.n_warmup = 200;
  cfg.sampler.n_samples = 200;
  cfg.identity.temperatures = 1;
  cfg.seed = seed;
  const auto a = run_experiment(cfg), b = run_experiment(cfg);
  const bool same = response_csv(a.curve) == response_csv(b.curve) && identity_csv(a.identity) == identity_csv(b.identity);
  r.add("sampler", "rerun CSVs byte-identical", same ? 1.0 : 0.0, "==", "1", same);
}

struct Options {
  std::uint64_t seed = 1;
  bool inject_gradient_fault = false;
};

/// Full suite; well under a minute on one core.
inline Report run_validation(const Options& opt = {}) {
  Report r;
  const std::uint64_t s = opt.seed;
  {
    const MixtureModel mix;
    const auto mdata = mix.simulate(1.5, 200, derive_seed(s, 0, 10));
    const ReducedRankModel rrr(3, 3, 2);
    const auto rdata = rrr.simulate(rrr.rank_one_teacher(2.0), 200, derive_seed(s, 0, 11));
    const TwoLayerNetModel nn(10);
    const TwoLayerNetModel teacher(3, nn.noise_sd());
    const auto ndata = nn.simulate(
        teacher, TwoLayerNetModel::pack({1.5, -1.0, 1.0}, {1.0, -1.5, 2.0}, {0.0, 0.5, -0.5}, 0.2), 200,
        derive_seed(s, 0, 12));
    const ConjugateGaussianModel conj(2);
    const auto cdata = conj.simulate(std::vector<double>{1.0, -1.0}, 50, derive_seed(s, 0, 13));

    check_gradients(r, "mixture", mix, mdata, s);
    check_gradients(r, "rrr", rrr, rdata, s);
    check_gradients(r, "nn", nn, ndata, s);
    if (opt.inject_gradient_fault)
      check_gradients(r, "conjugate (fault injected)", FaultyGradientModel(2), cdata, s);
    else
      check_gradients(r, "conjugate", conj, cdata, s);

    check_gauge_invariance(r, mix, mdata, s);
    check_gauge_invariance(r, rrr, rdata, s);
    check_gauge_invariance(r, nn, ndata, s);
  }
  check_quadrature(r);
  check_quadrature_identity(r);
  {
    const ConjugateGaussianModel m(1);
    const auto data = m.simulate(std::vector<double>{1.0}, 20, derive_seed(s, 0, 14));
    check_sampled_identity(r, "conjugate", m, data, observable_by_name(m, "theta_1"), s, 4000);
  }
  check_log_partition(r, s, 16, 250000);
  check_regular_constants(r, s, 10000);
  check_wbic(r, s);
  check_sampler(r, s);

  r.add("bound", "Cauchy-Schwarz checks run", static_cast<double>(r.bounds.count), ">", "0", r.bounds.count > 0);
  r.add("bound", "Cauchy-Schwarz violations", static_cast<double>(r.bounds.violations), "==", "0",
        r.bounds.violations == 0);
  return r;
}

}  // namespace thermo::validation

#endif  // THERMO_VALIDATION_HPP

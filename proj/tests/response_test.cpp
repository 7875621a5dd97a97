#include <cmath>

#include <gtest/gtest.h>

#include "test_models.hpp"
#include "thermo/quadrature.hpp"
#include "thermo/response.hpp"

using namespace thermo;
using namespace thermo::testing;

namespace {

HmcConfig config(std::uint64_t seed, std::size_t samples = 4000) {
  HmcConfig cfg;
  cfg.seed = seed;
  cfg.n_samples = samples;
  return cfg;
}

ChainOutput shifted(const ChainOutput& chain, double c) {
  ChainOutput out = chain;
  for (auto& l : out.loglik_series) l += c;
  return out;
}

}  // namespace

TEST(OrderParameter, ConstantSeries) {
  const std::vector<double> flat(200, 2.5);
  const auto e = order_parameter(flat);
  EXPECT_EQ(e.value, 2.5);
  EXPECT_EQ(e.se, 0.0);
}

TEST(OrderParameter, ConjugateTemperedMean) {
  const ConjugateGaussianModel m(1);
  const ConjugateGaussianModel::Data data(1, {0.0, 1.0, 2.0});
  const auto chain = run_chain(m, data, 0.5, config(1));
  const auto e = order_parameter(chain, m, data, observable_by_name(m, "theta_1"));
  EXPECT_NEAR(e.value, 0.6, 3 * e.se);
  EXPECT_GT(e.se, 0.0);
}

TEST(Susceptibility, ConstantScalingAndClosedForm) {
  const std::vector<double> flat(200, -1.0);
  EXPECT_EQ(susceptibility(flat, 0.7), 0.0);

  const ConjugateGaussianModel m(1);
  const auto data = m.simulate(std::vector<double>{0.5}, 10, 2);
  const double beta = 0.4;
  const auto chain = run_chain(m, data, beta, config(2, 8000));
  const auto f = chain.samples.column(0);
  std::vector<double> scaled(f);
  for (auto& v : scaled) v *= 4.0;
  EXPECT_EQ(susceptibility(scaled, beta), 16.0 * susceptibility(f, beta));

  // Var of the sample variance of a Gaussian is about 2 sigma^4 / ESS.
  const double exact = beta / (1 + beta * 10);
  std::vector<double> sq(f.size());
  const double mf = mean(f);
  for (std::size_t t = 0; t < f.size(); ++t) sq[t] = (f[t] - mf) * (f[t] - mf);
  const double se = beta * std::sqrt(variance(sq) / effective_sample_size(sq).ess);
  EXPECT_NEAR(susceptibility(f, beta), exact, 3 * se);
}

TEST(HeatCapacity, EmptyDatasetAndClosedForm) {
  const ConjugateGaussianModel m(2);
  const auto empty = run_chain(m, ConjugateGaussianModel::Data(2, {}), 1.0, config(3, 200));
  EXPECT_EQ(heat_capacity(empty), 0.0);

  const auto data = m.simulate(std::vector<double>{1.0, 0.0}, 20, 3);
  for (double beta : {0.1, 1.0}) {
    const auto chain = run_chain(m, data, beta, config(4, 8000));
    const auto& l = chain.loglik_series;
    const double ml = mean(l);
    std::vector<double> sq(l.size());
    for (std::size_t t = 0; t < l.size(); ++t) sq[t] = (l[t] - ml) * (l[t] - ml);
    const double se = std::sqrt(variance(sq) / effective_sample_size(sq).ess);
    EXPECT_NEAR(heat_capacity(chain), conjugate_loglik_variance(m, data, beta), 3 * se) << "beta=" << beta;
  }
}

TEST(WaicComplexity, EmptyDataset) {
  const ConjugateGaussianModel m(1);
  const auto chain = run_chain(m, ConjugateGaussianModel::Data(1, {}), 1.0, config(5, 200));
  EXPECT_EQ(waic_complexity(chain).p_waic, 0.0);
  EXPECT_EQ(waic_complexity(chain).waic_transform, 0.0);
}

TEST(WaicComplexity, RegularModelEffectiveDimension) {
  const ConjugateGaussianModel m(3);
  const auto data = m.simulate(std::vector<double>{0.5, -0.5, 1.0}, 500, 6);
  const auto chain = run_chain(m, data, 1.0, config(6));
  const auto w = waic_complexity(chain);
  EXPECT_NEAR(w.p_waic, 3.0, 0.15 * 3.0);
  EXPECT_NEAR(w.p_waic, conjugate_pointwise_variance_sum(m, data, 1.0), 0.15 * 3.0);
  EXPECT_DOUBLE_EQ(w.waic_transform, std::log1p(w.p_waic / 500));
}

TEST(WaicComplexity, GaugeTransformedSamplesGiveSameValue) {
  const ReducedRankModel m(3, 3, 2);
  const auto data = rrr_data(m, 100);
  const auto chain = run_chain(m, data, 1.0, config(7, 1000));
  Rng rng(7);
  const auto moved = transform_chain(m, data, chain, [&](ParamView t) { return m.apply_gauge(t, 1, rng); });
  EXPECT_NEAR(waic_complexity(moved).p_waic, waic_complexity(chain).p_waic, 1e-9);
}

TEST(Wbic, DefinitionShiftAndEvidence) {
  const ConjugateGaussianModel m(1);
  const auto data = m.simulate(std::vector<double>{0.7}, 100, 8);
  const auto chain = run_chain(m, data, wbic_beta(100), config(8));
  const double w = wbic(chain, 100);
  EXPECT_EQ(w, -mean(chain.loglik_series));
  EXPECT_DOUBLE_EQ(wbic(shifted(chain, 3.5), 100), w - 3.5);
  const double neg_log_evidence = -conjugate_log_partition(m, data, 1.0);
  EXPECT_NEAR(w / neg_log_evidence, 1.0, 0.2);
  const auto other = run_chain(m, data, 0.5, config(8, 200));
  EXPECT_THROW(wbic(other, 100), std::invalid_argument);
}

TEST(Rlct, ExactSyntheticCurve) {
  const double c = -12.0, lambda = 1.75;
  auto curve = [&](double b) { return c + lambda / b; };
  EXPECT_NEAR(rlct_estimate(0.2, curve(0.2), 0.45, curve(0.45)), lambda, 1e-12);
  EXPECT_THROW(rlct_estimate(0.2, 1.0, 0.2, 2.0), std::invalid_argument);
}

TEST(Rlct, RegularModelHalfDimension) {
  const ConjugateGaussianModel m(2);
  const std::size_t n = 1000;
  const auto data = m.simulate(std::vector<double>{0.3, -0.2}, n, 9);
  const double bn = wbic_beta(n);
  BetaGrid grid;
  grid.values = {bn / 1.5, bn * 1.5};
  const auto sweep = run_sweep(m, data, grid, config(9, 10000), {.prior_chain = false});
  const double lambda = rlct_estimate(sweep, grid.values[0], grid.values[1]);
  EXPECT_GE(lambda, 0.85);
  EXPECT_LE(lambda, 1.15);

  SweepResult moved = sweep;
  for (auto& chain : moved.chains) chain = shifted(chain, -41.0);
  const auto& a = moved.chains[0];
  const auto& b = moved.chains[1];
  const auto& a0 = sweep.chains[0];
  const auto& b0 = sweep.chains[1];
  // Constant shifts cancel in the difference of means up to the rounding of the shifted series.
  EXPECT_NEAR(rlct_estimate(a.beta, -mean(a.loglik_series), b.beta, -mean(b.loglik_series)),
              rlct_estimate(a0.beta, -mean(a0.loglik_series), b0.beta, -mean(b0.loglik_series)), 1e-9);
  EXPECT_EQ(rlct_estimate(0.2, 5.0 + 7.0, 0.4, 3.0 + 7.0), rlct_estimate(0.2, 5.0, 0.4, 3.0));
}

TEST(ResponseSpeedBound, EqualityAndConstantCases) {
  const std::vector<double> l{-3.0, -1.0, -2.5, -0.5, -4.0};
  const auto eq = response_speed_bound_check(l, l);
  EXPECT_EQ(eq.lhs, eq.rhs);
  EXPECT_TRUE(eq.holds());
  const std::vector<double> flat(5, 1.0);
  const auto zero = response_speed_bound_check(flat, l);
  EXPECT_EQ(zero.lhs, 0.0);
  EXPECT_EQ(zero.rhs, 0.0);
  EXPECT_TRUE(zero.holds());
}

TEST(CovarianceIdentity, ConstantObservable) {
  const std::vector<double> flat(500, 1.0);
  std::vector<double> l(500);
  for (std::size_t t = 0; t < l.size(); ++t) l[t] = std::sin(0.3 * t);
  const auto r = identity_from_series(0.5, 0.05, flat, l, flat, flat);
  EXPECT_EQ(r.fd_derivative, 0.0);
  EXPECT_EQ(r.covariance, 0.0);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(CovarianceIdentity, QuadratureResidualDecaysQuadratically) {
  const ConjugateGaussianModel m(1);
  const auto data = m.simulate(std::vector<double>{1.2}, 20, 10);
  const auto f = [](ParamView t) { return t[0] * t[0] * t[0]; };
  // E_beta[theta^3] = mean^3 + 3 mean var in closed form.
  const auto g = [&](double b) {
    const auto mom = conjugate_tempered_moments(m, data, b);
    return std::pow(mom.mean[0], 3) + 3 * mom.mean[0] * mom.variance;
  };
  for (double beta : {0.1, 0.5, 1.0}) {
    // The central difference overshoots by (beta h)^2 g'''(beta) / 6 to leading order.
    const double d = 1e-2 * beta;
    const double g3 = (g(beta + 2 * d) - 2 * g(beta + d) + 2 * g(beta - d) - g(beta - 2 * d)) / (2 * d * d * d);
    const auto spec = symmetric_spec(1, beta, 1.0, 4001, 1.0);
    std::vector<double> res;
    for (double h : {0.1, 0.05, 0.025}) {
      const auto r = quadrature_identity_check(m, data, f, beta, h, spec);
      const double leading = h * h * beta * beta * g3 / 6;
      res.push_back(std::abs(r.residual));
      EXPECT_NEAR(r.residual, leading, 0.05 * std::abs(leading)) << "beta=" << beta << " h=" << h;
    }
    EXPECT_NEAR(res[0] / res[1], 4.0, 0.2) << "beta=" << beta;
    EXPECT_NEAR(res[1] / res[2], 4.0, 0.2) << "beta=" << beta;
  }
}

TEST(CovarianceIdentity, QuadratureResidualBelowBoundAtSmallStep) {
  // For the mean of a d=1 conjugate posterior the truncation term peaks at h^2 n xbar / 16,
  // so n = 3, xbar = 1 stays below 1e-6 at every temperature.
  const ConjugateGaussianModel conj(1);
  const ConjugateGaussianModel::Data cdata(1, {0.5, 1.0, 1.5});
  const auto theta = [](ParamView t) { return t[0]; };
  const auto cgrid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, cdata.size(), true, true);
  for (double beta : cgrid.values) {
    const auto cr = quadrature_identity_check(conj, cdata, theta, beta, 1e-3, symmetric_spec(1, beta, 1.0, 4001, 1.0));
    EXPECT_LT(std::abs(cr.residual), 1e-6) << "conjugate beta=" << beta;
    const double u = beta * 3.0;
    EXPECT_NEAR(cr.residual, 1e-6 * 3.0 * u * u / std::pow(1 + u, 4), 1e-8) << "conjugate beta=" << beta;
  }
  const MixtureModel mix;
  const auto mdata = mixture_data(200);
  const auto abs_mu = [](ParamView t) { return std::abs(t[0]); };
  const auto mgrid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, mdata.size(), true, true);
  for (double beta : identity_temperatures(mgrid)) {
    const auto mr = quadrature_identity_check(mix, mdata, abs_mu, beta, 1e-3, symmetric_spec(1, beta, 3.0, 8001));
    EXPECT_LT(std::abs(mr.residual), 1e-6) << "mixture beta=" << beta;
  }
}

TEST(IdentityTemperatures, InteriorAndSpread) {
  const auto grid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, 200, true, true);
  const auto t = identity_temperatures(grid);
  ASSERT_EQ(t.size(), 5u);
  EXPECT_GT(t.front(), grid.values.front());
  EXPECT_LT(t.back(), grid.values.back());
  for (std::size_t k = 1; k < t.size(); ++k) EXPECT_GT(t[k], t[k - 1]);
  EXPECT_THROW(identity_temperatures(make_beta_grid(0.1, 1.0, 6, 10, false, false)), std::invalid_argument);
}

TEST(CovarianceIdentity, SampledMixtureNearSusceptibilityPeak) {
  const MixtureModel m;
  const auto data = mixture_data(200);
  const auto obs = observable_by_name(m, "abs_mean");
  const auto r = covariance_identity_check(m, data, obs, 0.026, 0.05, config(11, 8000));
  EXPECT_LE(std::abs(r.residual), 3 * r.mc_se) << "fd=" << r.fd_derivative << " cov=" << r.covariance;
  EXPECT_GT(r.mc_se, 0.0);
}

TEST(LogPartition, MissingPriorChain) {
  SweepResult sweep;
  EXPECT_THROW(log_partition_curve(sweep), std::invalid_argument);
}

TEST(LogPartition, ConjugateClosedFormOnDefaultGrid) {
  const ConjugateGaussianModel m(1);
  const std::size_t n = 20;
  const auto data = m.simulate(std::vector<double>{0.8}, n, 12);
  const auto grid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, n, true, true);
  const auto sweep = run_sweep(m, data, grid, config(12));
  const auto log_z = log_partition_curve(sweep);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double exact = conjugate_log_partition(m, data, grid.values[k]);
    EXPECT_NEAR(log_z[k] / exact, 1.0, 0.01) << "beta=" << grid.values[k];
  }

  // First derivative of the measured curve against the sampled E_beta[l].
  const auto slope = nonuniform_derivative(grid.values, log_z);
  for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
    const auto& l = sweep.chains[k].loglik_series;
    const double se = std::sqrt(variance(l) / effective_sample_size(l).ess);
    EXPECT_NEAR(slope[k], mean(l), 3 * se) << "beta=" << grid.values[k];
  }
}

TEST(LogPartition, CurvatureMatchesHeatCapacity) {
  // Relative noise in the curvature falls like 1/sqrt(d), so d=4 keeps the run short.
  const ConjugateGaussianModel m(4);
  const std::size_t n = 20;
  const auto data = m.simulate(std::vector<double>(4, 0.8), n, 13);
  const auto grid = make_beta_grid(0.05, std::pow(10.0, 0.5), 16, n, false, false);
  HmcConfig cfg = config(13, 250000);
  const auto sweep = run_sweep(m, data, grid, cfg);
  const auto log_z = log_partition_curve(sweep);
  const auto curvature = nonuniform_second_derivative(grid.values, log_z);
  for (std::size_t k = 1; k + 1 < grid.size(); ++k) {
    const double c = heat_capacity(sweep.chains[k]);
    EXPECT_NEAR(curvature[k] / c, 1.0, 0.05) << "beta=" << grid.values[k];
  }
}

TEST(SusceptibilityPeak, EndpointInteriorAndTies) {
  ResponseCurve monotone, interior, tie;
  for (int k = 0; k < 5; ++k) {
    monotone.rows.push_back({.beta = 0.1 * (k + 1), .chi = 1.0 * k});
    interior.rows.push_back({.beta = 0.1 * (k + 1), .chi = k == 2 ? 9.0 : 1.0});
    tie.rows.push_back({.beta = 0.1 * (k + 1), .chi = (k == 1 || k == 3) ? 4.0 : 0.0});
  }
  EXPECT_EQ(find_susceptibility_peak(monotone).index, 4u);
  EXPECT_EQ(find_susceptibility_peak(interior).index, 2u);
  EXPECT_EQ(find_susceptibility_peak(tie).index, 1u);
  EXPECT_THROW(find_susceptibility_peak(ResponseCurve{}), std::invalid_argument);
}

TEST(ResponseCurve, RowsNonnegativeAndGaugeInvariant) {
  const ReducedRankModel m(3, 3, 2);
  const auto data = rrr_data(m, 100);
  const auto grid = make_beta_grid(0.05, 2.0, 4, data.size(), false, false);
  HmcConfig cfg = config(14, 600);
  cfg.n_warmup = 400;
  const auto sweep = run_sweep(m, data, grid, cfg);
  const auto obs = observable_by_name(m, "second_singular_value");
  const auto curve = build_response_curve(m, data, sweep, obs);
  ASSERT_EQ(curve.rows.size(), grid.size());
  for (const auto& row : curve.rows) {
    EXPECT_GE(row.chi, 0.0);
    EXPECT_GE(row.heat_capacity, 0.0);
    EXPECT_GE(row.p_waic, 0.0);
    EXPECT_NEAR(row.free_energy, -row.logZ / row.beta, 1e-12 * std::abs(row.free_energy));
  }

  Rng rng(15);
  SweepResult moved = sweep;
  auto gauge = [&](ParamView t) { return m.apply_gauge(t, 1, rng); };
  for (auto& chain : moved.chains) chain = transform_chain(m, data, chain, gauge);
  moved.prior_chain = transform_chain(m, data, *sweep.prior_chain, gauge);
  const auto curve2 = build_response_curve(m, data, moved, obs);
  for (std::size_t k = 0; k < curve.rows.size(); ++k) {
    const auto& a = curve.rows[k];
    const auto& b = curve2.rows[k];
    EXPECT_NEAR(a.m, b.m, 1e-9);
    EXPECT_NEAR(a.m_se, b.m_se, 1e-9);
    EXPECT_NEAR(a.chi, b.chi, 1e-9);
    EXPECT_NEAR(a.heat_capacity, b.heat_capacity, 1e-9);
    EXPECT_NEAR(a.p_waic, b.p_waic, 1e-9);
    EXPECT_NEAR(a.waic_transform, b.waic_transform, 1e-9);
    EXPECT_NEAR(a.logZ, b.logZ, 1e-9);
    EXPECT_NEAR(a.free_energy, b.free_energy, 1e-9);
    EXPECT_NEAR(a.ess, b.ess, 1e-6);
    EXPECT_EQ(a.accept_rate, b.accept_rate);
  }
}

TEST(ResponseCurve, MixtureOrderParameterNondecreasing) {
  const MixtureModel m;
  const auto data = mixture_data(200, 1.5, 17);
  const auto grid = make_beta_grid(1e-2, std::pow(10.0, 0.5), 25, data.size(), true, true);
  const auto sweep = run_sweep(m, data, grid, config(17, 2000));
  const auto curve = build_response_curve(m, data, sweep, observable_by_name(m, "abs_mean"));
  for (std::size_t k = 1; k < curve.rows.size(); ++k) {
    const auto& prev = curve.rows[k - 1];
    const auto& row = curve.rows[k];
    EXPECT_GE(row.m, prev.m - 2 * std::hypot(row.m_se, prev.m_se)) << "beta=" << row.beta;
  }
}

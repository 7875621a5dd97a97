#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "test_models.hpp"
#include "thermo/observables.hpp"

using namespace thermo;
using namespace thermo::testing;

TEST(Observables, AbsMean) {
  const MixtureModel m;
  const auto data = mixture_data();
  EXPECT_EQ(eval_observable(observable_by_name(m, "abs_mean"), ParameterVector{-2.0}, m, data), 2.0);
}

TEST(Observables, LoglikOnEmptyDatasetIsZero) {
  const MixtureModel m;
  EXPECT_EQ(eval_observable(observable_by_name(m, "loglik"), ParameterVector{1.0}, m, MixtureModel::Data{}), 0.0);
  const ConjugateGaussianModel c(2);
  EXPECT_EQ(eval_observable(observable_by_name(c, "loglik"), ParameterVector{1.0, 2.0}, c,
                            ConjugateGaussianModel::Data(2, {})),
            0.0);
}

TEST(Observables, SecondSingularValueDiagonalCase) {
  const ReducedRankModel m(2, 2, 2);
  const auto theta = m.pack(Matrix::identity(2), Matrix(2, 2, {3, 0, 0, 1}));
  const auto data = m.simulate(Matrix(2, 2), 3, 1);
  EXPECT_NEAR(eval_observable(observable_by_name(m, "second_singular_value"), theta, m, data), 1.0, 1e-14);
  EXPECT_NEAR(eval_observable(observable_by_name(m, "effective_rank"), theta, m, data), 16.0 / 10.0, 1e-14);
}

TEST(Observables, MismatchAndNonFinite) {
  const MixtureModel m;
  EXPECT_THROW(observable_by_name(m, "n_eff_units"), std::invalid_argument);
  EXPECT_THROW(eval_observable(observable_by_name(m, "mu"), ParameterVector{INFINITY}, m, mixture_data()),
               std::domain_error);
}

TEST(NEff, Examples) {
  EXPECT_DOUBLE_EQ(n_eff(std::vector<double>(10, 0.37)), 10.0);
  EXPECT_EQ(n_eff({1, 0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(n_eff({2, 1}), 1.8);
  EXPECT_THROW(n_eff({0, 0, 0}), std::domain_error);
}

TEST(NEff, RangeOnRandomVectors) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> len(1, 30);
  std::exponential_distribution<double> e(1.0);
  std::bernoulli_distribution zero(0.3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> s(len(rng));
    for (auto& v : s) v = zero(rng) ? 0.0 : e(rng);
    s[0] += 1e-3;
    const double v = n_eff(s);
    ASSERT_GE(v, 1.0 - 1e-12);
    ASSERT_LE(v, static_cast<double>(s.size()) * (1 + 1e-12));
  }
}

TEST(CheckInvariance, Examples) {
  Rng rng(1);
  const MixtureModel mix;
  const auto mdata = mixture_data();
  std::vector<ParameterVector> mus;
  for (int k = 0; k < 100; ++k) mus.push_back(mix.sample_prior(rng));
  EXPECT_EQ(check_invariance(observable_by_name(mix, "abs_mean"), mix, mdata, mus, 1, rng), 0.0);
  EXPECT_THROW(check_invariance(observable_by_name(mix, "mu"), mix, mdata, mus, 1, rng), std::invalid_argument);

  const ReducedRankModel rrr(3, 3, 2);
  const auto rdata = rrr_data(rrr);
  std::vector<ParameterVector> rt;
  for (int k = 0; k < 100; ++k) rt.push_back(rrr.sample_prior(rng));
  EXPECT_LE(check_invariance(observable_by_name(rrr, "second_singular_value"), rrr, rdata, rt, 1, rng), 1e-9);

  const TwoLayerNetModel nn(10);
  const auto ndata = nn_data(nn);
  std::vector<ParameterVector> nt;
  for (int k = 0; k < 100; ++k) nt.push_back(nn.sample_prior(rng));
  EXPECT_EQ(check_invariance(observable_by_name(nn, "n_eff_units"), nn, ndata, nt, 1, rng), 0.0);
}

namespace {

template <StatModel M>
void expect_all_invariant(const M& model, const typename M::Data& data, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ParameterVector> thetas;
  for (int k = 0; k < 100; ++k) thetas.push_back(model.sample_prior(rng));
  for (const auto& obs : shipped_observables(model)) {
    if (!obs.invariant) continue;
    EXPECT_LE(check_invariance(obs, model, data, thetas, 1, rng), 1e-9) << model.name() << "/" << obs.name;
  }
}

}  // namespace

TEST(CheckInvariance, EveryInvariantObservableOfEveryModel) {
  expect_all_invariant(MixtureModel(), mixture_data(), 1);
  const ReducedRankModel rrr(3, 3, 2);
  expect_all_invariant(rrr, rrr_data(rrr), 2);
  const TwoLayerNetModel nn(10);
  expect_all_invariant(nn, nn_data(nn), 3);
  const ConjugateGaussianModel c(2);
  expect_all_invariant(c, c.simulate(std::vector<double>{1, 2}, 10, 1), 4);
}

TEST(PointwiseLoglik, SumsToTotal) {
  const TwoLayerNetModel nn(10);
  const auto data = nn_data(nn);
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const auto theta = nn.sample_prior(rng);
    const auto pts = pointwise_loglik(nn, theta, data);
    double s = 0;
    for (double v : pts) s += v;
    EXPECT_NEAR(s / nn.loglik_total(theta, data), 1.0, 1e-12);
  }
}

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "thermo/stats.hpp"

using namespace thermo;

namespace {

double two_pass_mean(const std::vector<double>& x) {
  long double s = 0;
  for (double v : x) s += v;
  return static_cast<double>(s / x.size());
}

double two_pass_variance(const std::vector<double>& x) {
  const long double m = two_pass_mean(x);
  long double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return static_cast<double>(s / (x.size() - 1));
}

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = shift + z(rng);
  return x;
}

}  // namespace

TEST(MomentAccumulator, SingleValueHasMeanButNoVariance) {
  MomentAccumulator acc;
  acc.add(5.0);
  EXPECT_EQ(acc.mean(), 5.0);
  EXPECT_THROW(acc.variance(), std::domain_error);
}

TEST(MomentAccumulator, SymmetricTriple) {
  MomentAccumulator acc;
  for (double v : {1.0, 2.0, 3.0}) acc.add(v);
  EXPECT_DOUBLE_EQ(acc.mean(), 2.0);
  EXPECT_DOUBLE_EQ(acc.variance(), 1.0);
}

TEST(MomentAccumulator, MatchesTwoPassOnNormalDraws) {
  const auto x = normal_draws(10000, 7);
  MomentAccumulator acc;
  for (double v : x) acc.add(v);
  EXPECT_NEAR(acc.mean(), two_pass_mean(x), 1e-10 * std::abs(two_pass_mean(x)) + 1e-15);
  EXPECT_NEAR(acc.variance() / two_pass_variance(x), 1.0, 1e-10);
}

TEST(MomentAccumulator, NoCancellationAtLargeOffset) {
  const auto x = normal_draws(10000, 8, 1e8);
  MomentAccumulator acc;
  for (double v : x) acc.add(v);
  EXPECT_NEAR(acc.variance() / two_pass_variance(x), 1.0, 1e-6);
}

TEST(MomentAccumulator, MergeEqualsConcatenation) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 300);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = normal_draws(len(rng), rng(), 3.0);
    const auto b = normal_draws(len(rng), rng(), -1.0);
    MomentAccumulator left, right, whole;
    for (double v : a) left.add(v), whole.add(v);
    for (double v : b) right.add(v), whole.add(v);
    left.merge(right);
    ASSERT_EQ(left.count(), whole.count());
    if (whole.count() == 0) continue;
    EXPECT_NEAR(left.mean(), whole.mean(), 1e-12 * (1.0 + std::abs(whole.mean())));
    if (whole.count() >= 2) {
      EXPECT_NEAR(left.variance() / whole.variance(), 1.0, 1e-12);
    }
  }
}

TEST(MomentAccumulator, MergeIsAssociative) {
  const auto a = normal_draws(100, 1), b = normal_draws(57, 2), c = normal_draws(230, 3);
  auto acc = [](const std::vector<double>& x) {
    MomentAccumulator m;
    for (double v : x) m.add(v);
    return m;
  };
  auto ab_c = acc(a);
  ab_c.merge(acc(b));
  ab_c.merge(acc(c));
  auto bc = acc(b);
  bc.merge(acc(c));
  auto a_bc = acc(a);
  a_bc.merge(bc);
  EXPECT_NEAR(ab_c.mean(), a_bc.mean(), 1e-12);
  EXPECT_NEAR(ab_c.variance() / a_bc.variance(), 1.0, 1e-12);
}

TEST(CovarianceAccumulator, StreamingMatchesBatchAndMerges) {
  const auto a = normal_draws(500, 4);
  std::vector<double> b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = 2.0 * a[i] + std::sin(static_cast<double>(i));
  CovarianceAccumulator whole, first, second;
  for (std::size_t i = 0; i < a.size(); ++i) {
    whole.add(a[i], b[i]);
    (i < 200 ? first : second).add(a[i], b[i]);
  }
  first.merge(second);
  EXPECT_NEAR(whole.covariance() / covariance(a, b), 1.0, 1e-12);
  EXPECT_NEAR(first.covariance() / covariance(a, b), 1.0, 1e-12);
}

TEST(Covariance, DefiningExamples) {
  const std::vector<double> a{1, 2, 3};
  const std::vector<double> twice{2, 4, 6};
  const std::vector<double> flat{7, 7, 7};
  EXPECT_EQ(covariance(a, a), variance(a));
  EXPECT_EQ(covariance(a, flat), 0.0);
  EXPECT_DOUBLE_EQ(covariance(a, twice), 2.0);
}

TEST(Covariance, Errors) {
  const std::vector<double> a{1, 2, 3}, b{1, 2}, one{1};
  EXPECT_THROW(covariance(a, b), std::invalid_argument);
  EXPECT_THROW(covariance(one, one), std::invalid_argument);
}

TEST(Covariance, SampleCauchySchwarzHoldsExactly) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t n = 2 + trial % 40;
    std::vector<double> a(n), b(n);
    const double rho = u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = u(rng) * 1e3;
      b[i] = rho * a[i] + (trial % 3 == 0 ? 0.0 : u(rng));
    }
    ASSERT_LE(std::abs(covariance(a, b)), std::sqrt(variance(a) * variance(b))) << "trial " << trial;
  }
}

TEST(EffectiveSampleSize, WhiteNoiseIsNearN) {
  const auto x = normal_draws(10000, 21);
  const auto ess = effective_sample_size(x);
  EXPECT_GE(ess.ess, 0.8 * 10000);
  EXPECT_LE(ess.ess, 1.2 * 10000);
}

TEST(EffectiveSampleSize, ConstantSeriesConvention) {
  const std::vector<double> x(50, 3.25);
  const auto ess = effective_sample_size(x);
  EXPECT_EQ(ess.ess, 50.0);
  EXPECT_EQ(ess.autocorrelation_time, 0.0);
}

TEST(EffectiveSampleSize, Ar1MatchesIntegratedAutocorrelation) {
  constexpr double phi = 0.9;
  constexpr std::size_t n = 100000;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(n);
  x[0] = z(rng) / std::sqrt(1 - phi * phi);
  for (std::size_t t = 1; t < n; ++t) x[t] = phi * x[t - 1] + z(rng);
  const double expected = n * (1 - phi) / (1 + phi);
  const auto ess = effective_sample_size(x);
  EXPECT_NEAR(ess.ess / expected, 1.0, 0.2);
  EXPECT_GT(ess.truncation_lag, 0u);
}

TEST(EffectiveSampleSize, NeverExceedsCount) {
  // Alternating series has strongly negative lag-1 autocorrelation.
  std::vector<double> x(1000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2 ? 1.0 : -1.0) + 1e-3 * std::sin(0.1 * i);
  EXPECT_LE(effective_sample_size(x).ess, 1000.0);
  EXPECT_THROW(effective_sample_size(std::vector<double>(9, 1.0)), std::invalid_argument);
}

TEST(NonuniformDerivative, LinearAndConstant) {
  const std::vector<double> grid{0.1, 0.3, 0.35, 0.9, 2.0};
  std::vector<double> lin, flat(grid.size(), 4.0);
  for (double g : grid) lin.push_back(3 * g + 1);
  for (double d : nonuniform_derivative(grid, lin)) EXPECT_NEAR(d, 3.0, 1e-12);
  for (double d : nonuniform_derivative(grid, flat)) EXPECT_EQ(d, 0.0);
}

TEST(NonuniformDerivative, QuadraticExactOnLogGrid) {
  std::vector<double> grid, values;
  for (int i = 0; i < 25; ++i) grid.push_back(std::pow(10.0, -2.0 + 2.5 * i / 24.0));
  for (double g : grid) values.push_back(g * g);
  const auto d = nonuniform_derivative(grid, values);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(d[i] / (2 * grid[i]), 1.0, 1e-12);
}

TEST(NonuniformDerivative, ReproducesRandomQuadraticsOnRandomGrids) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 1.0), c(-3, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + trial % 12;
    std::vector<double> grid{c(rng)};
    for (std::size_t i = 1; i < n; ++i) grid.push_back(grid.back() + u(rng));
    const double a0 = c(rng), a1 = c(rng), a2 = c(rng);
    std::vector<double> v;
    for (double g : grid) v.push_back(a0 + a1 * g + a2 * g * g);
    const auto d1 = nonuniform_derivative(grid, v);
    const auto d2 = nonuniform_second_derivative(grid, v);
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_NEAR(d1[i], a1 + 2 * a2 * grid[i], 1e-9);
      ASSERT_NEAR(d2[i], 2 * a2, 1e-8);
    }
  }
}

TEST(NonuniformDerivative, RejectsBadGrids) {
  const std::vector<double> bad{0.0, 1.0, 1.0}, v{1, 2, 3}, shortg{0, 1}, shortv{0, 1};
  EXPECT_THROW(nonuniform_derivative(bad, v), std::invalid_argument);
  EXPECT_THROW(nonuniform_derivative(shortg, shortv), std::invalid_argument);
  EXPECT_THROW(nonuniform_second_derivative(bad, v), std::invalid_argument);
}

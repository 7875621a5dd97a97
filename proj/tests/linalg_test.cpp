#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "thermo/linalg.hpp"

using namespace thermo;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(r, c);
  for (auto& v : m.values()) v = z(rng);
  return m;
}

// Eigenvalues of a symmetric 3x3 matrix from the roots of its
// characteristic polynomial (trigonometric form of the cubic).
std::vector<double> symmetric3_eigenvalues(const Matrix& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = (a(0, 0) + a(1, 1) + a(2, 2)) / 3.0;
  const double p2 = std::pow(a(0, 0) - q, 2) + std::pow(a(1, 1) - q, 2) + std::pow(a(2, 2) - q, 2) + 2 * p1;
  const double p = std::sqrt(p2 / 6.0);
  Matrix b(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = (a(i, j) - (i == j ? q : 0.0)) / p;
  const double det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) -
                     b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0)) +
                     b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
  const double r = std::clamp(det / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double pi = std::acos(-1.0);
  const double e1 = q + 2 * p * std::cos(phi);
  const double e3 = q + 2 * p * std::cos(phi + 2 * pi / 3);
  const double e2 = 3 * q - e1 - e3;
  std::vector<double> e{e1, e2, e3};
  std::sort(e.begin(), e.end(), std::greater<>());
  return e;
}

}  // namespace

TEST(SingularValues, DiagonalAndZero) {
  Matrix d(2, 2);
  d(0, 0) = 3;
  d(1, 1) = 1;
  const auto sv = singular_values(d);
  EXPECT_DOUBLE_EQ(sv[0], 3.0);
  EXPECT_DOUBLE_EQ(sv[1], 1.0);
  for (double v : singular_values(Matrix(3, 4))) EXPECT_EQ(v, 0.0);
}

TEST(SingularValues, SquaresMatchCharacteristicPolynomialRoots) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix b = random_matrix(3, 3, rng);
    const auto sv = singular_values(b);
    const auto eig = symmetric3_eigenvalues(b.transpose() * b);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(sv[k] * sv[k], eig[k], 1e-8 * std::max(1.0, eig[0]));
  }
}

TEST(SingularValues, FrobeniusConservationAndOrdering) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t r = 1 + trial % 16, c = 1 + (trial * 7) % 16;
    const Matrix b = random_matrix(r, c, rng);
    const auto sv = singular_values(b);
    ASSERT_EQ(sv.size(), std::min(r, c));
    double s2 = 0;
    for (std::size_t k = 0; k < sv.size(); ++k) {
      EXPECT_GE(sv[k], 0.0);
      if (k > 0) {
        EXPECT_GE(sv[k - 1], sv[k]);
      }
      s2 += sv[k] * sv[k];
    }
    EXPECT_NEAR(s2 / b.frobenius_squared(), 1.0, 1e-10);
  }
}

TEST(SingularValues, RankOneProductHasOneNonzeroValue) {
  Matrix u(3, 1, {1, 2, 3}), v(4, 1, {1, -1, 0.5, 2});
  const auto sv = singular_values(u * v.transpose());
  EXPECT_NEAR(sv[0], std::sqrt(14.0) * std::sqrt(6.25), 1e-12);
  for (std::size_t k = 1; k < sv.size(); ++k) EXPECT_LT(sv[k], 1e-12);
}

TEST(SingularValues, RejectsNonFinite) {
  Matrix m(2, 2);
  m(1, 0) = std::nan("");
  EXPECT_THROW(singular_values(m), std::domain_error);
}

TEST(Inverse, RoundTripsRandomMatrices) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(4, 4, rng);
    const Matrix p = a * inverse(a);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p(i, j), i == j ? 1.0 : 0.0, 1e-9);
  }
  EXPECT_THROW(inverse(Matrix(2, 2)), std::domain_error);
  EXPECT_THROW(inverse(Matrix(2, 3)), std::invalid_argument);
}

#ifndef THERMO_STATS_HPP
#define THERMO_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace thermo {

/**
 * Streaming mean and variance (Welford).  Accumulators are plain values:
 * fill them independently and combine with merge().
 */
class MomentAccumulator {
public:
  void add(double x) noexcept {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  /// Chan et al. pairwise combination.
  void merge(const MomentAccumulator& other) noexcept {
    if (other.count_ == 0) return;
    if (count_ == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    const double n = na + nb;
    const double delta = other.mean_ - mean_;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    count_ += other.count_;
  }

  std::size_t count() const noexcept { return count_; }
  double mean() const noexcept { return mean_; }
  double m2() const noexcept { return m2_; }

  /// Unbiased (n-1) variance; requires at least two values.
  double variance() const {
    if (count_ < 2)
      throw std::domain_error("variance requires at least two values");
    return m2_ / static_cast<double>(count_ - 1);
  }

private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Paired accumulator: two marginal streams plus their centered cross-product.
class CovarianceAccumulator {
public:
  void add(double x, double y) noexcept {
    const double dx = x - x_.mean();
    x_.add(x);
    y_.add(y);
    cross_ += dx * (y - y_.mean());
  }

  void merge(const CovarianceAccumulator& other) noexcept {
    if (other.count() == 0) return;
    if (count() == 0) {
      *this = other;
      return;
    }
    const double na = static_cast<double>(count());
    const double nb = static_cast<double>(other.count());
    const double dx = other.x_.mean() - x_.mean();
    const double dy = other.y_.mean() - y_.mean();
    cross_ += other.cross_ + dx * dy * na * nb / (na + nb);
    x_.merge(other.x_);
    y_.merge(other.y_);
  }

  std::size_t count() const noexcept { return x_.count(); }
  const MomentAccumulator& x() const noexcept { return x_; }
  const MomentAccumulator& y() const noexcept { return y_; }
  double cross() const noexcept { return cross_; }

  double covariance() const {
    if (count() < 2)
      throw std::domain_error("covariance requires at least two values");
    return cross_ / static_cast<double>(count() - 1);
  }

private:
  MomentAccumulator x_;
  MomentAccumulator y_;
  double cross_ = 0.0;
};

/// Two-pass mean.
inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty series");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/**
 * Unbiased sample covariance sum((a-abar)(b-bbar))/(n-1).
 *
 * Uses two passes with the same centering for both arguments, so
 * covariance(a, a) and variance(a) are bitwise identical.
 */
namespace detail {

inline double centered_cross(std::span<const double> a, std::span<const double> b) {
  const double ma = mean(a);
  const double mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

}  // namespace detail

/// Unbiased sample covariance, clamped so |cov| <= sqrt(var a * var b) holds in floating point.
inline double covariance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("covariance: length mismatch");
  if (a.size() < 2)
    throw std::invalid_argument("covariance: need at least two values");
  const double c = detail::centered_cross(a, b);
  if (a.data() == b.data()) return c;
  const double bound = std::sqrt(detail::centered_cross(a, a) * detail::centered_cross(b, b));
  return std::clamp(c, -bound, bound);
}

inline double variance(std::span<const double> a) { return covariance(a, a); }

struct EssDiagnostics {
  double ess = 0.0;
  double autocorrelation_time = 0.0;
  std::size_t truncation_lag = 0;
};

/**
 * Effective sample size with Geyer's initial positive sequence: sum
 * autocorrelation pairs rho(2m)+rho(2m+1) while they stay positive.
 * A constant series is reported as ess = n, tau = 0.
 */
inline EssDiagnostics effective_sample_size(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 10) throw std::invalid_argument("effective_sample_size: series too short (< 10)");
  const double mu = mean(series);
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = series[i] - mu;

  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / static_cast<double>(n);
  };

  const double gamma0 = autocov(0);
  EssDiagnostics out;
  if (!(gamma0 > 0.0)) {
    out.ess = static_cast<double>(n);
    return out;
  }

  double pair_sum = 0.0;
  std::size_t last_lag = 0;
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    const double r0 = (m == 0) ? 1.0 : autocov(2 * m) / gamma0;
    const double r1 = autocov(2 * m + 1) / gamma0;
    const double pair = r0 + r1;
    if (!(pair > 0.0)) break;
    pair_sum += pair;
    last_lag = 2 * m + 1;
  }
  const double tau = std::max(-1.0 + 2.0 * pair_sum, 0.0);
  out.autocorrelation_time = tau;
  out.truncation_lag = last_lag;
  out.ess = tau > 1.0 ? static_cast<double>(n) / tau : static_cast<double>(n);
  return out;
}

namespace detail {

inline void check_grid(std::span<const double> grid, std::span<const double> values) {
  if (grid.size() != values.size())
    throw std::invalid_argument("nonuniform derivative: grid/value length mismatch");
  if (grid.size() < 3)
    throw std::invalid_argument("nonuniform derivative: need at least three points");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1]))
      throw std::invalid_argument("nonuniform derivative: grid must be strictly increasing");
}

/// Derivative at x of the quadratic interpolating (x0,y0),(x1,y1),(x2,y2).
inline double lagrange3_slope(double x, double x0, double x1, double x2,
                              double y0, double y1, double y2) {
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  return d01 + (d12 - d01) / (x2 - x0) * ((x - x0) + (x - x1));
}

}  // namespace detail

/**
 * First derivative of tabulated values on a strictly increasing grid.
 * Three-point stencil in the interior, one-sided three-point stencils at
 * both ends; exact for polynomials of degree <= 2.
 */
inline std::vector<double> nonuniform_derivative(std::span<const double> grid,
                                                 std::span<const double> values) {
  detail::check_grid(grid, values);
  const std::size_t n = grid.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = std::clamp<std::size_t>(i, 1, n - 2);
    out[i] = detail::lagrange3_slope(grid[i], grid[j - 1], grid[j], grid[j + 1],
                                     values[j - 1], values[j], values[j + 1]);
  }
  return out;
}

/**
 * Second derivative via the three-point quadratic through each point and
 * its neighbours.  Endpoints reuse the adjacent interior stencil.  Exact
 * for polynomials of degree <= 2.
 */
inline std::vector<double> nonuniform_second_derivative(std::span<const double> grid,
                                                        std::span<const double> values) {
  detail::check_grid(grid, values);
  const std::size_t n = grid.size();
  std::vector<double> out(n);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double hm = grid[i] - grid[i - 1];
    const double hp = grid[i + 1] - grid[i];
    out[i] = 2.0 * (hm * values[i + 1] - (hm + hp) * values[i] + hp * values[i - 1]) /
             (hm * hp * (hm + hp));
  }
  out[0] = out[1];
  out[n - 1] = out[n - 2];
  return out;
}

}  // namespace thermo

#endif  // THERMO_STATS_HPP

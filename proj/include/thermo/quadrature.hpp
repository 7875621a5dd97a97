#ifndef THERMO_QUADRATURE_HPP
#define THERMO_QUADRATURE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "thermo/model.hpp"
#include "thermo/response.hpp"

// Deterministic tempered expectations for models with at most two
// parameters: composite Simpson on a fixed rectangle.

namespace thermo {

struct QuadratureSpec {
  std::vector<std::pair<double, double>> bounds;  ///< one [lo, hi] per dimension
  std::size_t points_per_dim = 2001;              ///< odd
  double beta = 1.0;
};

class QuadratureTailError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct QuadratureResult {
  double value = 0.0;           ///< E_beta[f]
  double log_normalizer = 0.0;  ///< log of the integral of exp(log tempered density) = log Z(beta)
};

/// Bounds of centre +- 12 * scale in every dimension.
inline QuadratureSpec symmetric_spec(std::size_t dim, double beta, double scale, std::size_t points = 2001,
                                     double centre = 0.0) {
  QuadratureSpec s;
  s.bounds.assign(dim, {centre - 12.0 * scale, centre + 12.0 * scale});
  s.points_per_dim = points;
  s.beta = beta;
  return s;
}

namespace detail {

inline std::vector<double> simpson_weights(std::size_t points, double lo, double hi) {
  const double h = (hi - lo) / static_cast<double>(points - 1);
  std::vector<double> w(points);
  for (std::size_t i = 0; i < points; ++i)
    w[i] = (i == 0 || i + 1 == points) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
  for (auto& v : w) v *= h / 3.0;
  return w;
}

struct GridNode {
  std::vector<double> theta;
  double log_weight;  ///< log quadrature weight + log tempered density
};

/// Tensor grid with log integrand; checks the boundary density against the peak.
template <StatModel M>
std::vector<GridNode> tempered_grid(const M& model, const typename M::Data& data, const QuadratureSpec& spec) {
  const std::size_t d = model.dimension();
  if (d == 0 || d > 2) throw std::invalid_argument("quadrature: model dimension must be 1 or 2");
  if (spec.bounds.size() != d) throw std::invalid_argument("quadrature: need one bound per dimension");
  if (spec.points_per_dim < 3 || spec.points_per_dim % 2 == 0)
    throw std::invalid_argument("quadrature: points_per_dim must be odd and >= 3");
  for (auto [lo, hi] : spec.bounds)
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("quadrature: bounds must be finite with lo < hi");

  const std::size_t m = spec.points_per_dim;
  std::vector<std::vector<double>> axes(d), weights(d);
  for (std::size_t k = 0; k < d; ++k) {
    const auto [lo, hi] = spec.bounds[k];
    weights[k] = simpson_weights(m, lo, hi);
    axes[k].resize(m);
    for (std::size_t i = 0; i < m; ++i)
      axes[k][i] = i + 1 == m ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
  }

  std::vector<GridNode> nodes;
  nodes.reserve(d == 1 ? m : m * m);
  double peak = -std::numeric_limits<double>::infinity();
  double boundary = -std::numeric_limits<double>::infinity();
  auto visit = [&](std::vector<double> theta, double log_w, bool on_edge) {
    const double ld = log_tempered_density(model, theta, spec.beta, data);
    peak = std::max(peak, ld);
    if (on_edge) boundary = std::max(boundary, ld);
    nodes.push_back({std::move(theta), std::log(log_w) + ld});
  };
  if (d == 1) {
    for (std::size_t i = 0; i < m; ++i) visit({axes[0][i]}, weights[0][i], i == 0 || i + 1 == m);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j)
        visit({axes[0][i], axes[1][j]}, weights[0][i] * weights[1][j], i == 0 || j == 0 || i + 1 == m || j + 1 == m);
  }
  if (boundary - peak > std::log(1e-12))
    throw QuadratureTailError("quadrature: density at the boundary exceeds 1e-12 of its peak; widen the bounds");
  return nodes;
}

inline double log_sum(const std::vector<GridNode>& nodes, double& shift) {
  shift = -std::numeric_limits<double>::infinity();
  for (const auto& n : nodes) shift = std::max(shift, n.log_weight);
  double s = 0.0;
  for (const auto& n : nodes) s += std::exp(n.log_weight - shift);
  return s;
}

}  // namespace detail

/// E_beta[f] and log Z(beta) by tensor-product Simpson quadrature.
template <StatModel M>
QuadratureResult grid_expectation(const M& model, const typename M::Data& data,
                                  const std::function<double(ParamView)>& f, const QuadratureSpec& spec) {
  const auto nodes = detail::tempered_grid(model, data, spec);
  double shift = 0.0;
  const double norm = detail::log_sum(nodes, shift);
  double num = 0.0;
  for (const auto& n : nodes) num += f(n.theta) * std::exp(n.log_weight - shift);
  return {num / norm, shift + std::log(norm)};
}

template <StatModel M>
QuadratureResult grid_expectation(const M& model, const typename M::Data& data, const Observable<M>& obs,
                                  const QuadratureSpec& spec) {
  return grid_expectation(model, data, [&](ParamView t) { return obs.fn(t, model, data); }, spec);
}

/// Cov_beta(f, g) computed about the quadrature means.
template <StatModel M>
double grid_covariance(const M& model, const typename M::Data& data, const std::function<double(ParamView)>& f,
                       const std::function<double(ParamView)>& g, const QuadratureSpec& spec) {
  const auto nodes = detail::tempered_grid(model, data, spec);
  double shift = 0.0;
  const double norm = detail::log_sum(nodes, shift);
  std::vector<double> w(nodes.size()), fv(nodes.size()), gv(nodes.size());
  double ef = 0.0, eg = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    w[i] = std::exp(nodes[i].log_weight - shift) / norm;
    fv[i] = f(nodes[i].theta);
    gv[i] = g(nodes[i].theta);
    ef += w[i] * fv[i];
    eg += w[i] * gv[i];
  }
  double c = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) c += w[i] * (fv[i] - ef) * (gv[i] - eg);
  return c;
}

/**
 * Noise-free identity check: central difference of quadrature
 * expectations at beta(1 -+ h) against the quadrature covariance with the
 * log likelihood at beta.  mc_se is zero.
 */
template <StatModel M>
IdentityReport quadrature_identity_check(const M& model, const typename M::Data& data,
                                         const std::function<double(ParamView)>& f, double beta, double h,
                                         QuadratureSpec spec) {
  if (!(h > 0.0 && h < 1.0)) throw std::invalid_argument("identity check: h must lie in (0, 1)");
  IdentityReport r;
  r.beta = beta;
  spec.beta = beta * (1.0 - h);
  const double lo = grid_expectation(model, data, f, spec).value;
  spec.beta = beta * (1.0 + h);
  const double hi = grid_expectation(model, data, f, spec).value;
  spec.beta = beta;
  r.fd_derivative = (hi - lo) / (2.0 * beta * h);
  r.covariance = grid_covariance(model, data, f, [&](ParamView t) { return model.loglik_total(t, data); }, spec);
  r.residual = r.fd_derivative - r.covariance;
  return r;
}

}  // namespace thermo

#endif  // THERMO_QUADRATURE_HPP

#ifndef THERMO_MODEL_HPP
#define THERMO_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thermo {

using Rng = std::mt19937_64;
using ParamView = std::span<const double>;

/// Flat parameter vector for one model instance.
class ParameterVector {
public:
  ParameterVector() = default;
  explicit ParameterVector(std::size_t d, double fill = 0.0) : values_(d, fill) {}
  explicit ParameterVector(std::vector<double> v) : values_(std::move(v)) {}
  explicit ParameterVector(ParamView v) : values_(v.begin(), v.end()) {}
  ParameterVector(std::initializer_list<double> v) : values_(v) {}

  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) noexcept { return values_[i]; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  operator ParamView() const noexcept { return values_; }
  ParamView view() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;

private:
  std::vector<double> values_;
};

/**
 * Interface implemented by every statistical model.  Data is held by the
 * caller and passed in; model objects are immutable after construction.
 * Gauge index 0 is always the identity; other indices may be randomized
 * families that draw their group element from the supplied generator.
 */
template <class M>
concept StatModel = requires(const M& m, const typename M::Data& data, ParamView theta,
                             std::size_t i, Rng& rng) {
  { m.name() } -> std::convertible_to<std::string>;
  { m.dimension() } -> std::convertible_to<std::size_t>;
  { m.log_prior(theta) } -> std::convertible_to<double>;
  { m.grad_log_prior(theta) } -> std::same_as<std::vector<double>>;
  { m.loglik_point(theta, i, data) } -> std::convertible_to<double>;
  { m.loglik_total(theta, data) } -> std::convertible_to<double>;
  { m.grad_loglik_total(theta, data) } -> std::same_as<std::vector<double>>;
  { m.gauge_names() } -> std::same_as<std::vector<std::string>>;
  { m.apply_gauge(theta, i, rng) } -> std::same_as<ParameterVector>;
  { m.sample_prior(rng) } -> std::same_as<ParameterVector>;
  { data.size() } -> std::convertible_to<std::size_t>;
};

namespace detail {

inline void require_finite(ParamView theta, const char* where) {
  for (double v : theta)
    if (!std::isfinite(v)) throw std::domain_error(std::string(where) + ": non-finite parameter");
}

template <StatModel M>
void require_dimension(const M& model, ParamView theta) {
  if (theta.size() != model.dimension())
    throw std::invalid_argument(model.name() + ": parameter length " + std::to_string(theta.size()) +
                                " does not match dimension " + std::to_string(model.dimension()));
}

}  // namespace detail

/// log prior + beta * total log likelihood (unnormalized tempered posterior).
template <StatModel M>
double log_tempered_density(const M& model, ParamView theta, double beta,
                            const typename M::Data& data) {
  if (!(beta >= 0.0)) throw std::invalid_argument("log_tempered_density: beta must be >= 0");
  detail::require_dimension(model, theta);
  detail::require_finite(theta, "log_tempered_density");
  const double prior = model.log_prior(theta);
  return beta == 0.0 ? prior : prior + beta * model.loglik_total(theta, data);
}

template <StatModel M>
std::vector<double> grad_log_tempered(const M& model, ParamView theta, double beta,
                                      const typename M::Data& data) {
  if (!(beta >= 0.0)) throw std::invalid_argument("grad_log_tempered: beta must be >= 0");
  detail::require_dimension(model, theta);
  auto g = model.grad_log_prior(theta);
  if (beta != 0.0) {
    const auto gl = model.grad_loglik_total(theta, data);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += beta * gl[k];
  }
  for (double v : g)
    if (!std::isfinite(v)) throw std::domain_error("grad_log_tempered: non-finite gradient");
  return g;
}

/**
 * Max absolute deviation between the analytic gradient of the beta = 1
 * log density and its central finite-difference approximation.
 */
template <StatModel M>
double check_gradient(const M& model, ParamView theta, const typename M::Data& data, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("check_gradient: h must lie in [1e-7, 1e-3]");
  const auto analytic = grad_log_tempered(model, theta, 1.0, data);
  std::vector<double> probe(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    const double saved = probe[k];
    probe[k] = saved + h;
    const double up = log_tempered_density(model, probe, 1.0, data);
    probe[k] = saved - h;
    const double down = log_tempered_density(model, probe, 1.0, data);
    probe[k] = saved;
    worst = std::max(worst, std::abs((up - down) / (2.0 * h) - analytic[k]));
  }
  return worst;
}

template <StatModel M>
ParameterVector apply_gauge(const M& model, ParamView theta, std::size_t gauge, Rng& rng) {
  const auto names = model.gauge_names();
  if (gauge >= names.size())
    throw std::out_of_range(model.name() + ": gauge index " + std::to_string(gauge) + " not declared");
  detail::require_dimension(model, theta);
  return model.apply_gauge(theta, gauge, rng);
}

/// Per-datum log likelihoods; entry i = log p(x_i | theta).
template <StatModel M>
std::vector<double> pointwise_loglik(const M& model, ParamView theta, const typename M::Data& data) {
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.loglik_point(theta, i, data);
  return out;
}

inline constexpr double log_two_pi = 1.8378770664093454836;

}  // namespace thermo

#endif  // THERMO_MODEL_HPP

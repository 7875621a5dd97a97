#ifndef THERMO_MODELS_MIXTURE_HPP
#define THERMO_MODELS_MIXTURE_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermo/model.hpp"

namespace thermo {

/**
 * Symmetric two-component Gaussian mixture
 *
 *   p(x | mu) = 1/2 N(x; mu, s^2) + 1/2 N(x; -mu, s^2)
 *
 * with a single mean parameter mu, fixed noise scale s and a N(0, s0^2)
 * prior.  The model is singular at mu = 0, where both components coincide.
 */
class MixtureModel {
public:
  struct Data {
    std::vector<double> x;
    std::size_t size() const noexcept { return x.size(); }
  };

  explicit MixtureModel(double noise_sd = 1.0, double prior_sd = 3.0)
      : noise_sd_(noise_sd), prior_sd_(prior_sd) {
    if (!(noise_sd > 0.0) || !(prior_sd > 0.0))
      throw std::invalid_argument("MixtureModel: scales must be positive");
  }

  std::string name() const { return "mixture"; }
  std::size_t dimension() const noexcept { return 1; }
  double noise_sd() const noexcept { return noise_sd_; }
  double prior_sd() const noexcept { return prior_sd_; }

  double log_prior(ParamView theta) const {
    const double z = theta[0] / prior_sd_;
    return -0.5 * z * z - std::log(prior_sd_) - 0.5 * log_two_pi;
  }

  std::vector<double> grad_log_prior(ParamView theta) const {
    return {-theta[0] / (prior_sd_ * prior_sd_)};
  }

  // Only mu*mu and |mu*x| enter, so mu and -mu give bitwise-equal results.
  double loglik_point(ParamView theta, std::size_t i, const Data& data) const {
    const double var = noise_sd_ * noise_sd_;
    const double mu = theta[0];
    const double x = data.x[i];
    const double a = std::abs(mu * x) / var;
    // log cosh(a) = a + log1p(exp(-2a)) - log 2 (log-sum-exp of +-a)
    const double log_cosh = a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    return -0.5 * log_two_pi - std::log(noise_sd_) - 0.5 * (x * x + mu * mu) / var + log_cosh;
  }

  double loglik_total(ParamView theta, const Data& data) const {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) s += loglik_point(theta, i, data);
    return s;
  }

  std::vector<double> grad_loglik_total(ParamView theta, const Data& data) const {
    const double var = noise_sd_ * noise_sd_;
    const double mu = theta[0];
    double g = 0.0;
    for (double x : data.x) g += -mu / var + (x / var) * std::tanh(mu * x / var);
    return {g};
  }

  std::vector<std::string> gauge_names() const { return {"identity", "sign_flip"}; }

  ParameterVector apply_gauge(ParamView theta, std::size_t gauge, Rng&) const {
    ParameterVector out(theta);
    if (gauge == 1) out[0] = -out[0];
    return out;
  }

  ParameterVector sample_prior(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, prior_sd_);
    return ParameterVector{normal(rng)};
  }

  /// n draws from the symmetric mixture at teacher mean mu_star.
  Data simulate(double mu_star, std::size_t n, std::uint64_t seed) const {
    if (!std::isfinite(mu_star)) throw std::invalid_argument("MixtureModel::simulate: non-finite teacher");
    Rng rng(seed);
    std::bernoulli_distribution coin(0.5);
    std::normal_distribution<double> normal(0.0, 1.0);
    Data d;
    d.x.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double centre = coin(rng) ? mu_star : -mu_star;
      d.x.push_back(centre + noise_sd_ * normal(rng));
    }
    return d;
  }

private:
  double noise_sd_;
  double prior_sd_;
};

}  // namespace thermo

#endif  // THERMO_MODELS_MIXTURE_HPP

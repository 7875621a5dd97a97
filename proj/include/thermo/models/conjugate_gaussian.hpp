#ifndef THERMO_MODELS_CONJUGATE_GAUSSIAN_HPP
#define THERMO_MODELS_CONJUGATE_GAUSSIAN_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermo/model.hpp"

namespace thermo {

/**
 * Regular baseline with closed-form tempered posterior: prior N(0, I_d),
 * likelihood x_i ~ N(theta, I_d).  Its total log likelihood only depends
 * on the sufficient statistics sum(x_i) and sum |x_i|^2.
 */
class ConjugateGaussianModel {
public:
  class Data {
  public:
    Data() = default;
    /// Row-major n x dim observations.
    Data(std::size_t dim, std::vector<double> rows) : dim_(dim), rows_(std::move(rows)) {
      if (dim == 0 ? !rows_.empty() : rows_.size() % dim != 0)
        throw std::invalid_argument("ConjugateGaussianModel::Data: rows not a multiple of dim");
      sum_.assign(dim, 0.0);
      for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t k = 0; k < dim; ++k) {
          const double v = rows_[i * dim + k];
          sum_[k] += v;
          sum_sq_ += v * v;
        }
    }

    std::size_t size() const noexcept { return dim_ == 0 ? 0 : rows_.size() / dim_; }
    std::size_t dim() const noexcept { return dim_; }
    double at(std::size_t i, std::size_t k) const noexcept { return rows_[i * dim_ + k]; }
    const std::vector<double>& sum() const noexcept { return sum_; }
    double sum_of_squares() const noexcept { return sum_sq_; }

  private:
    std::size_t dim_ = 0;
    std::vector<double> rows_;
    std::vector<double> sum_;
    double sum_sq_ = 0.0;
  };

  explicit ConjugateGaussianModel(std::size_t dim = 1) : dim_(dim) {}

  std::string name() const { return "conjugate"; }
  std::size_t dimension() const noexcept { return dim_; }

  double log_prior(ParamView theta) const {
    double s = 0.0;
    for (double v : theta) s += v * v;
    return -0.5 * s - 0.5 * static_cast<double>(dim_) * log_two_pi;
  }

  std::vector<double> grad_log_prior(ParamView theta) const {
    std::vector<double> g(theta.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = -theta[k];
    return g;
  }

  double loglik_point(ParamView theta, std::size_t i, const Data& data) const {
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double r = data.at(i, k) - theta[k];
      s += r * r;
    }
    return -0.5 * s - 0.5 * static_cast<double>(dim_) * log_two_pi;
  }

  double loglik_total(ParamView theta, const Data& data) const {
    const double n = static_cast<double>(data.size());
    double cross = 0.0, norm2 = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      cross += theta[k] * data.sum()[k];
      norm2 += theta[k] * theta[k];
    }
    const double sq = data.sum_of_squares() - 2.0 * cross + n * norm2;
    return -0.5 * sq - 0.5 * n * static_cast<double>(dim_) * log_two_pi;
  }

  std::vector<double> grad_loglik_total(ParamView theta, const Data& data) const {
    const double n = static_cast<double>(data.size());
    std::vector<double> g(dim_);
    for (std::size_t k = 0; k < dim_; ++k) g[k] = data.sum()[k] - n * theta[k];
    return g;
  }

  std::vector<std::string> gauge_names() const { return {"identity"}; }

  ParameterVector apply_gauge(ParamView theta, std::size_t, Rng&) const { return ParameterVector(theta); }

  ParameterVector sample_prior(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    ParameterVector t(dim_);
    for (auto& v : t) v = normal(rng);
    return t;
  }

  Data simulate(ParamView teacher, std::size_t n, std::uint64_t seed) const {
    if (teacher.size() != dim_)
      throw std::invalid_argument("ConjugateGaussianModel::simulate: teacher dimension mismatch");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> rows(n * dim_);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < dim_; ++k) rows[i * dim_ + k] = teacher[k] + normal(rng);
    return Data(dim_, std::move(rows));
  }

private:
  std::size_t dim_;
};

struct ConjugateMoments {
  std::vector<double> mean;
  double variance = 1.0;  ///< per coordinate
};

/// Exact tempered posterior N(beta*S/(1+beta*n), I/(1+beta*n)).
inline ConjugateMoments conjugate_tempered_moments(const ConjugateGaussianModel& model,
                                                   const ConjugateGaussianModel::Data& data,
                                                   double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("conjugate_tempered_moments: beta must be >= 0");
  const double precision = 1.0 + beta * static_cast<double>(data.size());
  ConjugateMoments m;
  m.variance = 1.0 / precision;
  m.mean.resize(model.dimension());
  for (std::size_t k = 0; k < m.mean.size(); ++k)
    m.mean[k] = data.size() == 0 ? 0.0 : beta * data.sum()[k] / precision;
  return m;
}

namespace detail {
inline double squared_sum_norm(const ConjugateGaussianModel::Data& data) {
  double s2 = 0.0;
  for (double v : data.sum()) s2 += v * v;
  return s2;
}
}  // namespace detail

/// log Z(beta) with the normalized prior, so log Z(0) = 0.
inline double conjugate_log_partition(const ConjugateGaussianModel& model,
                                      const ConjugateGaussianModel::Data& data, double beta) {
  const double n = static_cast<double>(data.size());
  const double d = static_cast<double>(model.dimension());
  const double s2 = detail::squared_sum_norm(data);
  return -0.5 * beta * n * d * log_two_pi - 0.5 * beta * data.sum_of_squares() +
         0.5 * beta * beta * s2 / (1.0 + beta * n) - 0.5 * d * std::log1p(beta * n);
}

/// E_beta[loglik] = d/dbeta log Z.
inline double conjugate_expected_loglik(const ConjugateGaussianModel& model,
                                        const ConjugateGaussianModel::Data& data, double beta) {
  const double n = static_cast<double>(data.size());
  const double d = static_cast<double>(model.dimension());
  const double s2 = detail::squared_sum_norm(data);
  const double p = 1.0 + beta * n;
  return -0.5 * n * d * log_two_pi - 0.5 * data.sum_of_squares() +
         0.5 * s2 * beta * (2.0 + beta * n) / (p * p) - 0.5 * d * n / p;
}

/// Var_beta[loglik] = d^2/dbeta^2 log Z.
inline double conjugate_loglik_variance(const ConjugateGaussianModel& model,
                                        const ConjugateGaussianModel::Data& data, double beta) {
  const double n = static_cast<double>(data.size());
  const double d = static_cast<double>(model.dimension());
  const double s2 = detail::squared_sum_norm(data);
  const double p = 1.0 + beta * n;
  return s2 / (p * p * p) + 0.5 * d * n * n / (p * p);
}

/// Exact sum over data of Var_beta[log p(x_i | theta)].
inline double conjugate_pointwise_variance_sum(const ConjugateGaussianModel& model,
                                               const ConjugateGaussianModel::Data& data,
                                               double beta) {
  const auto m = conjugate_tempered_moments(model, data, beta);
  const double s2 = m.variance;
  const double d = static_cast<double>(model.dimension());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double a2 = 0.0;
    for (std::size_t k = 0; k < model.dimension(); ++k) {
      const double a = data.at(i, k) - m.mean[k];
      a2 += a * a;
    }
    total += s2 * a2 + 0.5 * d * s2 * s2;
  }
  return total;
}

}  // namespace thermo

#endif  // THERMO_MODELS_CONJUGATE_GAUSSIAN_HPP

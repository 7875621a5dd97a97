#ifndef THERMO_MODELS_REDUCED_RANK_HPP
#define THERMO_MODELS_REDUCED_RANK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermo/linalg.hpp"
#include "thermo/model.hpp"

namespace thermo {

/**
 * Reduced-rank regression y = x B + noise with B = U V^T, U p x r and
 * V q x r.  Parameters are U then V, each row-major, so the dimension is
 * r (p + q).  Standard normal prior on every entry.
 *
 * The factorization is unidentifiable: (U, V) -> (U R, V R^{-T}) leaves B
 * unchanged for every invertible r x r matrix R.
 */
class ReducedRankModel {
public:
  struct Data {
    std::size_t p = 0;
    std::size_t q = 0;
    std::vector<double> x;  ///< n x p, row-major
    std::vector<double> y;  ///< n x q, row-major
    std::size_t size() const noexcept { return p == 0 ? 0 : x.size() / p; }
  };

  ReducedRankModel(std::size_t p, std::size_t q, std::size_t r, double noise_sd = 1.0)
      : p_(p), q_(q), r_(r), noise_sd_(noise_sd) {
    if (p == 0 || q == 0 || r == 0 || r > std::min(p, q))
      throw std::invalid_argument("ReducedRankModel: need 1 <= r <= min(p, q)");
    if (!(noise_sd > 0.0)) throw std::invalid_argument("ReducedRankModel: noise_sd must be positive");
  }

  std::string name() const { return "rrr"; }
  std::size_t dimension() const noexcept { return r_ * (p_ + q_); }
  std::size_t p() const noexcept { return p_; }
  std::size_t q() const noexcept { return q_; }
  std::size_t rank() const noexcept { return r_; }
  double noise_sd() const noexcept { return noise_sd_; }

  Matrix factor_u(ParamView theta) const {
    return Matrix(p_, r_, std::vector<double>(theta.begin(), theta.begin() + p_ * r_));
  }
  Matrix factor_v(ParamView theta) const {
    return Matrix(q_, r_, std::vector<double>(theta.begin() + p_ * r_, theta.begin() + dimension()));
  }

  /// B = U V^T (p x q).
  Matrix coefficient_matrix(ParamView theta) const { return factor_u(theta) * factor_v(theta).transpose(); }

  ParameterVector pack(const Matrix& u, const Matrix& v) const {
    if (u.rows() != p_ || u.cols() != r_ || v.rows() != q_ || v.cols() != r_)
      throw std::invalid_argument("ReducedRankModel::pack: factor shape mismatch");
    std::vector<double> t(u.values().begin(), u.values().end());
    t.insert(t.end(), v.values().begin(), v.values().end());
    return ParameterVector(std::move(t));
  }

  double log_prior(ParamView theta) const {
    double s = 0.0;
    for (double v : theta) s += v * v;
    return -0.5 * s - 0.5 * static_cast<double>(dimension()) * log_two_pi;
  }

  std::vector<double> grad_log_prior(ParamView theta) const {
    std::vector<double> g(theta.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = -theta[k];
    return g;
  }

  double loglik_point(ParamView theta, std::size_t i, const Data& data) const {
    check_data(data);
    return loglik_point(coefficient_matrix(theta), i, data);
  }

  double loglik_total(ParamView theta, const Data& data) const {
    check_data(data);
    const Matrix b = coefficient_matrix(theta);
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) s += loglik_point(b, i, data);
    return s;
  }

  std::vector<double> grad_loglik_total(ParamView theta, const Data& data) const {
    check_data(data);
    const Matrix u = factor_u(theta);
    const Matrix v = factor_v(theta);
    const Matrix b = u * v.transpose();
    // G = dl/dB = X^T E / sigma^2
    Matrix g(p_, q_);
    const double inv_var = 1.0 / (noise_sd_ * noise_sd_);
    std::vector<double> resid(q_);
    for (std::size_t i = 0; i < data.size(); ++i) {
      residual(b, i, data, resid);
      for (std::size_t a = 0; a < p_; ++a) {
        const double xa = data.x[i * p_ + a] * inv_var;
        for (std::size_t c = 0; c < q_; ++c) g(a, c) += xa * resid[c];
      }
    }
    const Matrix gu = g * v;              // p x r
    const Matrix gv = g.transpose() * u;  // q x r
    std::vector<double> out(gu.values().begin(), gu.values().end());
    out.insert(out.end(), gv.values().begin(), gv.values().end());
    return out;
  }

  std::vector<std::string> gauge_names() const { return {"identity", "gl_transform"}; }

  ParameterVector apply_gauge(ParamView theta, std::size_t gauge, Rng& rng) const {
    if (gauge == 0) return ParameterVector(theta);
    return apply_transform(theta, random_invertible(rng));
  }

  /// (U, V) -> (U R, V R^{-T}).
  ParameterVector apply_transform(ParamView theta, const Matrix& r) const {
    if (r.rows() != r_ || r.cols() != r_) throw std::invalid_argument("ReducedRankModel: R must be r x r");
    return pack(factor_u(theta) * r, factor_v(theta) * inverse(r).transpose());
  }

  /// Random Gaussian r x r matrix, redrawn until its condition number is <= max_condition.
  Matrix random_invertible(Rng& rng, double max_condition = 100.0) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
      Matrix r(r_, r_);
      for (auto& v : r.values()) v = normal(rng);
      if (condition_number(r) <= max_condition) return r;
    }
  }

  ParameterVector sample_prior(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    ParameterVector t(dimension());
    for (auto& v : t) v = normal(rng);
    return t;
  }

  /// Rows x ~ N(0, I_p), y = x B* + N(0, sigma^2 I_q).
  Data simulate(const Matrix& teacher, std::size_t n, std::uint64_t seed) const {
    if (teacher.rows() != p_ || teacher.cols() != q_)
      throw std::invalid_argument("ReducedRankModel::simulate: teacher must be p x q");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Data d{p_, q_, std::vector<double>(n * p_), std::vector<double>(n * q_)};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < p_; ++a) d.x[i * p_ + a] = normal(rng);
      for (std::size_t c = 0; c < q_; ++c) {
        double mean = 0.0;
        for (std::size_t a = 0; a < p_; ++a) mean += d.x[i * p_ + a] * teacher(a, c);
        d.y[i * q_ + c] = mean + noise_sd_ * normal(rng);
      }
    }
    return d;
  }

  /// Rank-one teacher s * u v^T with u = (1,...,1)/sqrt(p), v = (1,-1,1,...)/sqrt(q).
  Matrix rank_one_teacher(double singular_value) const {
    Matrix b(p_, q_);
    const double scale = singular_value / std::sqrt(static_cast<double>(p_ * q_));
    for (std::size_t a = 0; a < p_; ++a)
      for (std::size_t c = 0; c < q_; ++c) b(a, c) = scale * (c % 2 == 0 ? 1.0 : -1.0);
    return b;
  }

private:
  void check_data(const Data& data) const {
    if (data.p != p_ || data.q != q_ || data.y.size() != data.size() * q_)
      throw std::invalid_argument("ReducedRankModel: data shape mismatch");
  }

  void residual(const Matrix& b, std::size_t i, const Data& data, std::vector<double>& out) const {
    for (std::size_t c = 0; c < q_; ++c) {
      double pred = 0.0;
      for (std::size_t a = 0; a < p_; ++a) pred += data.x[i * p_ + a] * b(a, c);
      out[c] = data.y[i * q_ + c] - pred;
    }
  }

  double loglik_point(const Matrix& b, std::size_t i, const Data& data) const {
    double ss = 0.0;
    for (std::size_t c = 0; c < q_; ++c) {
      double pred = 0.0;
      for (std::size_t a = 0; a < p_; ++a) pred += data.x[i * p_ + a] * b(a, c);
      const double e = data.y[i * q_ + c] - pred;
      ss += e * e;
    }
    const double var = noise_sd_ * noise_sd_;
    return -0.5 * static_cast<double>(q_) * (log_two_pi + std::log(var)) - 0.5 * ss / var;
  }

  std::size_t p_, q_, r_;
  double noise_sd_;
};

}  // namespace thermo

#endif  // THERMO_MODELS_REDUCED_RANK_HPP

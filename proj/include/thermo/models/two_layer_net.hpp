#ifndef THERMO_MODELS_TWO_LAYER_NET_HPP
#define THERMO_MODELS_TWO_LAYER_NET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermo/model.hpp"

namespace thermo {

/**
 * Scalar-in, scalar-out tanh network
 *
 *   f(x) = sum_j a_j tanh(w_j x + b_j) + c
 *
 * with Gaussian noise of fixed scale.  Parameter layout: a[0..H), w[0..H),
 * b[0..H), c, so the dimension is 3H + 1.  Declared gauges are hidden-unit
 * permutations and per-unit sign flips (a, w, b) -> (-a, -w, -b).
 */
class TwoLayerNetModel {
public:
  struct Data {
    std::vector<double> x;
    std::vector<double> y;
    std::size_t size() const noexcept { return x.size(); }
  };

  explicit TwoLayerNetModel(std::size_t hidden, double noise_sd = 0.5)
      : hidden_(hidden), noise_sd_(noise_sd) {
    if (hidden == 0) throw std::invalid_argument("TwoLayerNetModel: need at least one hidden unit");
    if (!(noise_sd > 0.0)) throw std::invalid_argument("TwoLayerNetModel: noise_sd must be positive");
  }

  std::string name() const { return "nn"; }
  std::size_t dimension() const noexcept { return 3 * hidden_ + 1; }
  std::size_t hidden() const noexcept { return hidden_; }
  double noise_sd() const noexcept { return noise_sd_; }

  double out_weight(ParamView t, std::size_t j) const noexcept { return t[j]; }
  double in_weight(ParamView t, std::size_t j) const noexcept { return t[hidden_ + j]; }
  double bias(ParamView t, std::size_t j) const noexcept { return t[2 * hidden_ + j]; }
  double offset(ParamView t) const noexcept { return t[3 * hidden_]; }

  double predict(ParamView t, double x) const {
    double f = offset(t);
    for (std::size_t j = 0; j < hidden_; ++j)
      f += out_weight(t, j) * std::tanh(in_weight(t, j) * x + bias(t, j));
    return f;
  }

  /// Unit amplitudes s_j = |a_j| |w_j|.
  std::vector<double> amplitudes(ParamView t) const {
    std::vector<double> s(hidden_);
    for (std::size_t j = 0; j < hidden_; ++j) s[j] = std::abs(out_weight(t, j)) * std::abs(in_weight(t, j));
    return s;
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
    const double e = data.y[i] - predict(theta, data.x[i]);
    const double var = noise_sd_ * noise_sd_;
    return -0.5 * (log_two_pi + std::log(var)) - 0.5 * e * e / var;
  }

  double loglik_total(ParamView theta, const Data& data) const {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) s += loglik_point(theta, i, data);
    return s;
  }

  std::vector<double> grad_loglik_total(ParamView theta, const Data& data) const {
    const std::size_t h = hidden_;
    const double inv_var = 1.0 / (noise_sd_ * noise_sd_);
    std::vector<double> g(dimension(), 0.0);
    std::vector<double> act(h);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double x = data.x[i];
      double f = offset(theta);
      for (std::size_t j = 0; j < h; ++j) {
        act[j] = std::tanh(in_weight(theta, j) * x + bias(theta, j));
        f += out_weight(theta, j) * act[j];
      }
      const double e = (data.y[i] - f) * inv_var;
      for (std::size_t j = 0; j < h; ++j) {
        const double back = e * out_weight(theta, j) * (1.0 - act[j] * act[j]);
        g[j] += e * act[j];
        g[h + j] += back * x;
        g[2 * h + j] += back;
      }
      g[3 * h] += e;
    }
    return g;
  }

  std::vector<std::string> gauge_names() const {
    return {"identity", "unit_permutation", "sign_flip", "permutation_and_sign_flip"};
  }

  ParameterVector apply_gauge(ParamView theta, std::size_t gauge, Rng& rng) const {
    ParameterVector out(theta);
    if (gauge == 1 || gauge == 3) {
      std::vector<std::size_t> perm(hidden_);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      out = apply_permutation(out, perm);
    }
    if (gauge == 2 || gauge == 3) {
      std::bernoulli_distribution coin(0.5);
      std::vector<bool> flip(hidden_);
      for (std::size_t j = 0; j < hidden_; ++j) flip[j] = coin(rng);
      out = apply_sign_flip(out, flip);
    }
    return out;
  }

  /// Unit j of the result is unit perm[j] of the input.
  ParameterVector apply_permutation(ParamView theta, const std::vector<std::size_t>& perm) const {
    if (perm.size() != hidden_) throw std::invalid_argument("apply_permutation: wrong length");
    ParameterVector out(theta);
    for (std::size_t j = 0; j < hidden_; ++j)
      for (std::size_t block = 0; block < 3; ++block) out[block * hidden_ + j] = theta[block * hidden_ + perm[j]];
    return out;
  }

  ParameterVector apply_sign_flip(ParamView theta, const std::vector<bool>& flip) const {
    if (flip.size() != hidden_) throw std::invalid_argument("apply_sign_flip: wrong length");
    ParameterVector out(theta);
    for (std::size_t j = 0; j < hidden_; ++j)
      if (flip[j])
        for (std::size_t block = 0; block < 3; ++block) out[block * hidden_ + j] = -out[block * hidden_ + j];
    return out;
  }

  ParameterVector sample_prior(Rng& rng) const {
    std::normal_distribution<double> normal(0.0, 1.0);
    ParameterVector t(dimension());
    for (auto& v : t) v = normal(rng);
    return t;
  }

  /// x ~ Uniform[-3, 3], y = f_teacher(x) + noise; the teacher is any network of this family.
  Data simulate(const TwoLayerNetModel& teacher_net, ParamView teacher, std::size_t n,
                std::uint64_t seed) const {
    if (teacher.size() != teacher_net.dimension())
      throw std::invalid_argument("TwoLayerNetModel::simulate: teacher parameter length mismatch");
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(-3.0, 3.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    Data d;
    d.x.reserve(n);
    d.y.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = unif(rng);
      d.x.push_back(x);
      d.y.push_back(teacher_net.predict(teacher, x) + noise_sd_ * normal(rng));
    }
    return d;
  }

  /// Pack (a, w, b, c) into the flat layout.
  static ParameterVector pack(const std::vector<double>& a, const std::vector<double>& w,
                              const std::vector<double>& b, double c) {
    if (a.size() != w.size() || a.size() != b.size())
      throw std::invalid_argument("TwoLayerNetModel::pack: a, w, b lengths differ");
    std::vector<double> t(a);
    t.insert(t.end(), w.begin(), w.end());
    t.insert(t.end(), b.begin(), b.end());
    t.push_back(c);
    return ParameterVector(std::move(t));
  }

private:
  std::size_t hidden_;
  double noise_sd_;
};

}  // namespace thermo

#endif  // THERMO_MODELS_TWO_LAYER_NET_HPP

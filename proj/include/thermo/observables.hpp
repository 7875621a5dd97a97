#ifndef THERMO_OBSERVABLES_HPP
#define THERMO_OBSERVABLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thermo/linalg.hpp"
#include "thermo/model.hpp"
#include "thermo/models/conjugate_gaussian.hpp"
#include "thermo/models/mixture.hpp"
#include "thermo/models/reduced_rank.hpp"
#include "thermo/models/two_layer_net.hpp"

namespace thermo {

/**
 * A named real-valued function of the parameters.  `invariant` claims the
 * value is unchanged by every gauge the model declares; check_invariance()
 * verifies that claim on sampled gauges.
 */
template <StatModel M>
struct Observable {
  using Fn = std::function<double(ParamView, const M&, const typename M::Data&)>;
  std::string name;
  bool invariant = false;
  Fn fn;
};

/// Participation ratio (sum s)^2 / sum s^2; lies in [1, s.size()].
/// Sums run over the sorted amplitudes so unit order cannot change the result.
inline double n_eff(std::vector<double> s) {
  for (double v : s)
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("n_eff: amplitudes must be finite and >= 0");
  std::sort(s.begin(), s.end());
  double sum = 0.0, sum_sq = 0.0;
  for (double v : s) {
    sum += v;
    sum_sq += v * v;
  }
  if (sum_sq == 0.0) throw std::domain_error("n_eff: all amplitudes are zero (collapsed network)");
  return sum * sum / sum_sq;
}

/// (sum s)^2 / sum s^2 over the singular values of a matrix; 0 for the zero matrix.
inline double effective_rank(const Matrix& b) {
  const auto sv = singular_values(b);
  double sum = 0.0, sum_sq = 0.0;
  for (double v : sv) {
    sum += v;
    sum_sq += v * v;
  }
  return sum_sq == 0.0 ? 0.0 : sum * sum / sum_sq;
}

template <StatModel M>
Observable<M> loglik_observable() {
  return {"loglik", true, [](ParamView t, const M& m, const typename M::Data& d) { return m.loglik_total(t, d); }};
}

inline std::vector<Observable<MixtureModel>> shipped_observables(const MixtureModel&) {
  using D = MixtureModel::Data;
  return {
      {"abs_mean", true, [](ParamView t, const MixtureModel&, const D&) { return std::abs(t[0]); }},
      {"mu", false, [](ParamView t, const MixtureModel&, const D&) { return t[0]; }},
      loglik_observable<MixtureModel>(),
  };
}

inline std::vector<Observable<ReducedRankModel>> shipped_observables(const ReducedRankModel&) {
  using D = ReducedRankModel::Data;
  return {
      {"second_singular_value", true,
       [](ParamView t, const ReducedRankModel& m, const D&) {
         const auto sv = singular_values(m.coefficient_matrix(t));
         return sv.size() > 1 ? sv[1] : 0.0;
       }},
      {"effective_rank", true,
       [](ParamView t, const ReducedRankModel& m, const D&) { return effective_rank(m.coefficient_matrix(t)); }},
      loglik_observable<ReducedRankModel>(),
  };
}

inline std::vector<Observable<TwoLayerNetModel>> shipped_observables(const TwoLayerNetModel&) {
  using D = TwoLayerNetModel::Data;
  return {
      // Invariant under the declared permutation and sign-flip gauges only.
      {"n_eff_units", true, [](ParamView t, const TwoLayerNetModel& m, const D&) { return n_eff(m.amplitudes(t)); }},
      loglik_observable<TwoLayerNetModel>(),
  };
}

inline std::vector<Observable<ConjugateGaussianModel>> shipped_observables(const ConjugateGaussianModel& model) {
  using D = ConjugateGaussianModel::Data;
  std::vector<Observable<ConjugateGaussianModel>> out;
  // The conjugate model is identifiable, so every coordinate is a function of the predictive law.
  for (std::size_t k = 0; k < model.dimension(); ++k)
    out.push_back({"theta_" + std::to_string(k + 1), true,
                   [k](ParamView t, const ConjugateGaussianModel&, const D&) { return t[k]; }});
  out.push_back(loglik_observable<ConjugateGaussianModel>());
  return out;
}

template <StatModel M>
Observable<M> observable_by_name(const M& model, const std::string& name) {
  for (auto& obs : shipped_observables(model))
    if (obs.name == name) return obs;
  throw std::invalid_argument("observable '" + name + "' is not defined for model '" + model.name() + "'");
}

template <StatModel M>
double eval_observable(const Observable<M>& obs, ParamView theta, const M& model, const typename M::Data& data) {
  detail::require_finite(theta, "eval_observable");
  detail::require_dimension(model, theta);
  const double v = obs.fn(theta, model, data);
  if (!std::isfinite(v)) throw std::domain_error("observable '" + obs.name + "' returned a non-finite value");
  return v;
}

/**
 * Largest |obs(g(theta)) - obs(theta)| over `gauge_draws` random
 * non-identity gauges applied to each parameter sample.
 */
template <StatModel M>
double check_invariance(const Observable<M>& obs, const M& model, const typename M::Data& data,
                        const std::vector<ParameterVector>& thetas, std::size_t gauge_draws, Rng& rng) {
  if (!obs.invariant) throw std::invalid_argument("check_invariance: observable '" + obs.name + "' is not flagged invariant");
  const std::size_t n_gauges = model.gauge_names().size();
  double worst = 0.0;
  for (const auto& theta : thetas) {
    const double base = eval_observable(obs, theta, model, data);
    for (std::size_t k = 0; k < gauge_draws; ++k) {
      const std::size_t g = n_gauges > 1 ? 1 + k % (n_gauges - 1) : 0;
      const auto moved = apply_gauge(model, theta, g, rng);
      worst = std::max(worst, std::abs(eval_observable(obs, moved, model, data) - base));
    }
  }
  return worst;
}

}  // namespace thermo

#endif  // THERMO_OBSERVABLES_HPP

#ifndef THERMO_EXPERIMENT_HPP
#define THERMO_EXPERIMENT_HPP

// Config-driven experiments: JSON in, response_curve.csv,
// identity_checks.csv and manifest.json out.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "thermo/models/conjugate_gaussian.hpp"
#include "thermo/models/mixture.hpp"
#include "thermo/models/reduced_rank.hpp"
#include "thermo/models/two_layer_net.hpp"
#include "thermo/observables.hpp"
#include "thermo/response.hpp"
#include "thermo/sweep.hpp"

namespace thermo {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr const char* kResponseHeader =
    "beta,m,m_se,chi,heat_capacity,p_waic,waic_transform,logZ,free_energy,ess,accept_rate";
inline constexpr const char* kIdentityHeader = "observable,beta,h,fd_derivative,covariance,residual,mc_se,within_3se";

/// Invalid configuration; the message carries source and line.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct MixtureSettings {
  double noise_sd = 1.0;
  double prior_sd = 3.0;
  double mu_star = 1.5;
};

struct RrrSettings {
  std::size_t p = 3, q = 3, rank = 2;
  double noise_sd = 1.0;
  double teacher_singular_value = 2.0;  ///< rank-one teacher s u v^T
};

struct NetSettings {
  std::size_t hidden = 10;
  double noise_sd = 0.5;
  std::vector<double> teacher_a{1.5, -1.0, 1.0};
  std::vector<double> teacher_w{1.0, -1.5, 2.0};
  std::vector<double> teacher_b{0.0, 0.5, -0.5};
  double teacher_c = 0.2;
};

struct ConjugateSettings {
  std::size_t dim = 1;
  std::vector<double> teacher_mean{1.0};
};

struct GridSettings {
  double beta_min = 1e-2;
  double beta_max = 3.1622776601683795;  // 10^0.5
  std::size_t k = 25;
  bool include_unity = true;
  bool include_wbic = true;
};

struct IdentitySettings {
  double h = 0.05;               ///< relative step
  std::size_t temperatures = 5;  ///< 0 disables sampled identity checks
};

struct ExperimentConfig {
  std::string experiment = "mixture";
  std::size_t n = 200;
  std::uint64_t seed = 1;
  MixtureSettings mixture;
  RrrSettings rrr;
  NetSettings nn;
  ConjugateSettings conjugate;
  GridSettings grid;
  HmcConfig sampler;  ///< seed field unused; the top-level seed drives every stream
  StartMode start = StartMode::warm;
  std::size_t threads = 0;
  std::vector<std::string> observables;
  IdentitySettings identity;
  std::string output_dir;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"mixture", "rrr", "nn", "conjugate"};
  return names;
}

/// Shipped defaults for each experiment; configs/<name>.json mirrors these.
inline ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "mixture") {
    c.observables = {"abs_mean"};
    // chi varies by about 9% across the grid; 10000 draws bring its noise near 2%.
    c.sampler.n_samples = 10000;
  } else if (experiment == "rrr") {
    c.observables = {"second_singular_value", "effective_rank"};
  } else if (experiment == "nn") {
    c.observables = {"n_eff_units"};
  } else if (experiment == "conjugate") {
    // Small n keeps the trapezoidal log Z within 1% on the default grid.
    c.n = 20;
    c.observables = {"theta_1"};
    // The manifest carries ~140 closed-form comparisons; short chains make the SE estimates themselves noisy.
    c.sampler.n_samples = 10000;
  } else {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  return c;
}

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["experiment"] = c.experiment;
  j["n"] = c.n;
  j["seed"] = c.seed;
  if (c.experiment == "mixture") {
    j["model"] = {{"noise_sd", c.mixture.noise_sd}, {"prior_sd", c.mixture.prior_sd}};
    j["teacher"] = {{"mu_star", c.mixture.mu_star}};
  } else if (c.experiment == "rrr") {
    j["model"] = {{"p", c.rrr.p}, {"q", c.rrr.q}, {"rank", c.rrr.rank}, {"noise_sd", c.rrr.noise_sd}};
    j["teacher"] = {{"singular_value", c.rrr.teacher_singular_value}};
  } else if (c.experiment == "nn") {
    j["model"] = {{"hidden", c.nn.hidden}, {"noise_sd", c.nn.noise_sd}};
    j["teacher"] = {{"a", c.nn.teacher_a}, {"w", c.nn.teacher_w}, {"b", c.nn.teacher_b}, {"c", c.nn.teacher_c}};
  } else {
    j["model"] = {{"dim", c.conjugate.dim}};
    j["teacher"] = {{"mean", c.conjugate.teacher_mean}};
  }
  j["grid"] = {{"beta_min", c.grid.beta_min},
               {"beta_max", c.grid.beta_max},
               {"K", c.grid.k},
               {"include_unity", c.grid.include_unity},
               {"include_wbic", c.grid.include_wbic}};
  j["sampler"] = {{"n_warmup", c.sampler.n_warmup},
                  {"n_samples", c.sampler.n_samples},
                  {"n_leapfrog", c.sampler.n_leapfrog},
                  {"target_accept", c.sampler.target_accept},
                  {"init_step", c.sampler.init_step},
                  {"adapt", c.sampler.adapt},
                  {"step_jitter", c.sampler.step_jitter},
                  {"start", c.start == StartMode::warm ? "warm" : "cold"},
                  {"threads", c.threads}};
  j["observables"] = c.observables;
  j["identity"] = {{"h", c.identity.h}, {"temperatures", c.identity.temperatures}};
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
  return j;
}

/// FNV-1a over the canonical resolved config text, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

/// Seed of the synthetic dataset, separate from every chain stream.
inline std::uint64_t data_seed(const ExperimentConfig& c) {
  return derive_seed(c.seed, std::numeric_limits<std::uint64_t>::max(), 0);
}

/// Builds the configured model and its synthetic dataset, then returns fn(model, data).
template <class Fn>
decltype(auto) with_model(const ExperimentConfig& c, Fn&& fn) {
  const auto seed = data_seed(c);
  if (c.experiment == "mixture") {
    const MixtureModel m(c.mixture.noise_sd, c.mixture.prior_sd);
    return fn(m, m.simulate(c.mixture.mu_star, c.n, seed));
  }
  if (c.experiment == "rrr") {
    const ReducedRankModel m(c.rrr.p, c.rrr.q, c.rrr.rank, c.rrr.noise_sd);
    return fn(m, m.simulate(m.rank_one_teacher(c.rrr.teacher_singular_value), c.n, seed));
  }
  if (c.experiment == "nn") {
    const TwoLayerNetModel m(c.nn.hidden, c.nn.noise_sd);
    const TwoLayerNetModel teacher(c.nn.teacher_a.size(), c.nn.noise_sd);
    const auto t = TwoLayerNetModel::pack(c.nn.teacher_a, c.nn.teacher_w, c.nn.teacher_b, c.nn.teacher_c);
    return fn(m, m.simulate(teacher, t, c.n, seed));
  }
  if (c.experiment == "conjugate") {
    const ConjugateGaussianModel m(c.conjugate.dim);
    return fn(m, m.simulate(c.conjugate.teacher_mean, c.n, seed));
  }
  throw ConfigError("unknown experiment '" + c.experiment + "'");
}

namespace detail {

using Path = std::vector<std::string>;

inline std::string join_path(const Path& p) {
  if (p.empty()) return "(root)";
  std::string s;
  for (const auto& k : p) s += (s.empty() || k.front() == '[' ? "" : ".") + k;
  return s;
}

/// Best-effort source line of a key path: each key is searched after the previous one.
inline std::size_t locate_line(const std::string& text, const Path& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    if (key.front() == '[') continue;
    const std::string quoted = '"' + key + '"';
    for (std::size_t at = text.find(quoted, pos); at != std::string::npos; at = text.find(quoted, at + 1)) {
      const auto next = text.find_first_not_of(" \t\r\n", at + quoted.size());
      if (next != std::string::npos && text[next] == ':') {
        pos = at;
        break;
      }
    }
  }
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

class ConfigParser {
public:
  ConfigParser(std::string text, std::string source) : text_(std::move(text)), source_(std::move(source)) {}

  ExperimentConfig parse() {
    nlohmann::json root;
    try {
      root = nlohmann::json::parse(text_);
    } catch (const nlohmann::json::parse_error& e) {
      const auto byte = std::min<std::size_t>(e.byte, text_.size());
      const auto line = 1 + std::count(text_.begin(), text_.begin() + static_cast<std::ptrdiff_t>(byte), '\n');
      throw ConfigError(source_ + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    only_keys(root, {}, {"experiment", "n", "seed", "model", "teacher", "grid", "sampler", "observables", "identity",
                         "output_dir"});
    if (!root.contains("experiment")) fail({}, "missing required key 'experiment'");
    const auto& e = root["experiment"];
    if (!e.is_string()) fail({"experiment"}, "must be a string");
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), e.get<std::string>()) == names.end())
      fail({"experiment"}, "must be one of mixture, rrr, nn, conjugate");
    ExperimentConfig c = default_config(e.get<std::string>());

    c.n = integer(root, {}, "n", c.n, 2);
    c.seed = integer(root, {}, "seed", c.seed, 0);
    parse_model(root, c);

    const Path g{"grid"};
    const auto& grid = object(root, g);
    only_keys(grid, g, {"beta_min", "beta_max", "K", "include_unity", "include_wbic"});
    c.grid.beta_min = real(grid, g, "beta_min", c.grid.beta_min);
    c.grid.beta_max = real(grid, g, "beta_max", c.grid.beta_max);
    c.grid.k = integer(grid, g, "K", c.grid.k, 2);
    c.grid.include_unity = boolean(grid, g, "include_unity", c.grid.include_unity);
    c.grid.include_wbic = boolean(grid, g, "include_wbic", c.grid.include_wbic);
    if (!(c.grid.beta_min > 0.0)) fail({"grid", "beta_min"}, "must be positive");
    if (!(c.grid.beta_max > c.grid.beta_min)) fail({"grid", "beta_max"}, "must exceed beta_min");

    const Path s{"sampler"};
    const auto& smp = object(root, s);
    only_keys(smp, s, {"n_warmup", "n_samples", "n_leapfrog", "target_accept", "init_step", "adapt", "step_jitter",
                       "start", "threads"});
    c.sampler.n_warmup = integer(smp, s, "n_warmup", c.sampler.n_warmup, 0);
    c.sampler.n_samples = integer(smp, s, "n_samples", c.sampler.n_samples, 10);
    c.sampler.n_leapfrog = integer(smp, s, "n_leapfrog", c.sampler.n_leapfrog, 1);
    c.sampler.target_accept = real(smp, s, "target_accept", c.sampler.target_accept);
    c.sampler.init_step = real(smp, s, "init_step", c.sampler.init_step);
    c.sampler.adapt = boolean(smp, s, "adapt", c.sampler.adapt);
    c.sampler.step_jitter = real(smp, s, "step_jitter", c.sampler.step_jitter);
    c.threads = integer(smp, s, "threads", c.threads, 0);
    if (smp.contains("start")) {
      const auto& st = smp["start"];
      if (!st.is_string() || (st != "warm" && st != "cold")) fail({"sampler", "start"}, "must be \"warm\" or \"cold\"");
      c.start = st == "warm" ? StartMode::warm : StartMode::cold;
    }
    try {
      c.sampler.validate();
    } catch (const std::invalid_argument& ex) {
      fail(s, ex.what());
    }

    if (root.contains("observables")) {
      const auto& obs = root["observables"];
      if (!obs.is_array() || obs.empty()) fail({"observables"}, "must be a non-empty array of names");
      c.observables.clear();
      for (std::size_t i = 0; i < obs.size(); ++i) {
        if (!obs[i].is_string()) fail({"observables", "[" + std::to_string(i) + "]"}, "must be a string");
        c.observables.push_back(obs[i].get<std::string>());
      }
    }
    const auto known = with_model(c, [](const auto& model, const auto&) {
      std::vector<std::string> out;
      for (const auto& o : shipped_observables(model)) out.push_back(o.name);
      return out;
    });
    for (std::size_t i = 0; i < c.observables.size(); ++i)
      if (std::find(known.begin(), known.end(), c.observables[i]) == known.end()) {
        std::string list;
        for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
        fail({"observables", "[" + std::to_string(i) + "]"},
             "unknown observable '" + c.observables[i] + "' for " + c.experiment + " (known: " + list + ")");
      }

    const Path id{"identity"};
    const auto& ident = object(root, id);
    only_keys(ident, id, {"h", "temperatures"});
    c.identity.h = real(ident, id, "h", c.identity.h);
    c.identity.temperatures = integer(ident, id, "temperatures", c.identity.temperatures, 0);
    if (!(c.identity.h > 0.0 && c.identity.h < 1.0)) fail({"identity", "h"}, "must lie in (0, 1)");

    const std::size_t grid_size =
        make_beta_grid(c.grid.beta_min, c.grid.beta_max, c.grid.k, c.n, c.grid.include_unity, c.grid.include_wbic)
            .size();
    if (c.identity.temperatures > 0 && grid_size < c.identity.temperatures + 2)
      fail({"identity", "temperatures"}, "needs at least temperatures + 2 grid points");

    if (root.contains("output_dir")) {
      if (!root["output_dir"].is_string()) fail({"output_dir"}, "must be a string");
      c.output_dir = root["output_dir"].get<std::string>();
    }
    return c;
  }

private:
  std::string text_, source_;
  const nlohmann::json empty_ = nlohmann::json::object();

  [[noreturn]] void fail(const Path& p, const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(locate_line(text_, p)) + ": " + join_path(p) + ": " + what);
  }

  const nlohmann::json& object(const nlohmann::json& parent, const Path& p) const {
    if (!parent.contains(p.back())) return empty_;
    const auto& v = parent[p.back()];
    if (!v.is_object()) fail(p, "must be an object");
    return v;
  }

  void only_keys(const nlohmann::json& obj, const Path& p, std::initializer_list<const char*> allowed) const {
    if (!obj.is_object()) fail(p, "must be an object");
    for (const auto& [key, value] : obj.items()) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        Path at = p;
        at.push_back(key);
        fail(at, "unknown key '" + key + "'");
      }
    }
  }

  double real(const nlohmann::json& obj, Path p, const char* key, double fallback) const {
    if (!obj.contains(key)) return fallback;
    p.push_back(key);
    const auto& v = obj[key];
    if (!v.is_number() || !std::isfinite(v.get<double>())) fail(p, "must be a finite number");
    return v.get<double>();
  }

  template <class T>
  T integer(const nlohmann::json& obj, Path p, const char* key, T fallback, std::uint64_t minimum) const {
    if (!obj.contains(key)) return fallback;
    p.push_back(key);
    const auto& v = obj[key];
    if (!v.is_number_integer()) fail(p, "must be an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      if (u < minimum) fail(p, "must be >= " + std::to_string(minimum));
      if (u > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) fail(p, "is too large");
      return static_cast<T>(u);
    }
    const auto s = v.get<std::int64_t>();
    if (s < 0 || static_cast<std::uint64_t>(s) < minimum)
      fail(p, "must be >= " + std::to_string(minimum));
    return static_cast<T>(s);
  }

  bool boolean(const nlohmann::json& obj, Path p, const char* key, bool fallback) const {
    if (!obj.contains(key)) return fallback;
    p.push_back(key);
    if (!obj[key].is_boolean()) fail(p, "must be true or false");
    return obj[key].get<bool>();
  }

  std::vector<double> reals(const nlohmann::json& obj, Path p, const char* key, std::vector<double> fallback) const {
    if (!obj.contains(key)) return fallback;
    p.push_back(key);
    const auto& v = obj[key];
    if (!v.is_array() || v.empty()) fail(p, "must be a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) fail(p, "must contain only finite numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

  double positive(const nlohmann::json& obj, const Path& p, const char* key, double fallback) const {
    const double v = real(obj, p, key, fallback);
    if (!(v > 0.0)) {
      Path at = p;
      at.push_back(key);
      fail(at, "must be positive");
    }
    return v;
  }

  void parse_model(const nlohmann::json& root, ExperimentConfig& c) const {
    const Path mp{"model"}, tp{"teacher"};
    const auto& m = object(root, mp);
    const auto& t = object(root, tp);
    if (c.experiment == "mixture") {
      only_keys(m, mp, {"noise_sd", "prior_sd"});
      only_keys(t, tp, {"mu_star"});
      c.mixture.noise_sd = positive(m, mp, "noise_sd", c.mixture.noise_sd);
      c.mixture.prior_sd = positive(m, mp, "prior_sd", c.mixture.prior_sd);
      c.mixture.mu_star = real(t, tp, "mu_star", c.mixture.mu_star);
    } else if (c.experiment == "rrr") {
      only_keys(m, mp, {"p", "q", "rank", "noise_sd"});
      only_keys(t, tp, {"singular_value"});
      c.rrr.p = integer(m, mp, "p", c.rrr.p, 1);
      c.rrr.q = integer(m, mp, "q", c.rrr.q, 1);
      c.rrr.rank = integer(m, mp, "rank", c.rrr.rank, 1);
      c.rrr.noise_sd = positive(m, mp, "noise_sd", c.rrr.noise_sd);
      c.rrr.teacher_singular_value = real(t, tp, "singular_value", c.rrr.teacher_singular_value);
      if (c.rrr.rank > std::min(c.rrr.p, c.rrr.q)) fail({"model", "rank"}, "must not exceed min(p, q)");
      if (c.rrr.teacher_singular_value < 0.0) fail({"teacher", "singular_value"}, "must be >= 0");
    } else if (c.experiment == "nn") {
      only_keys(m, mp, {"hidden", "noise_sd"});
      only_keys(t, tp, {"a", "w", "b", "c"});
      c.nn.hidden = integer(m, mp, "hidden", c.nn.hidden, 1);
      c.nn.noise_sd = positive(m, mp, "noise_sd", c.nn.noise_sd);
      c.nn.teacher_a = reals(t, tp, "a", c.nn.teacher_a);
      c.nn.teacher_w = reals(t, tp, "w", c.nn.teacher_w);
      c.nn.teacher_b = reals(t, tp, "b", c.nn.teacher_b);
      c.nn.teacher_c = real(t, tp, "c", c.nn.teacher_c);
      if (c.nn.teacher_w.size() != c.nn.teacher_a.size()) fail({"teacher", "w"}, "must have the same length as a");
      if (c.nn.teacher_b.size() != c.nn.teacher_a.size()) fail({"teacher", "b"}, "must have the same length as a");
    } else {
      only_keys(m, mp, {"dim"});
      only_keys(t, tp, {"mean"});
      c.conjugate.dim = integer(m, mp, "dim", c.conjugate.dim, 1);
      c.conjugate.teacher_mean = reals(t, tp, "mean", std::vector<double>(c.conjugate.dim, 1.0));
      if (c.conjugate.teacher_mean.size() != c.conjugate.dim) fail({"teacher", "mean"}, "length must equal model.dim");
    }
  }
};

}  // namespace detail

/// Parses and validates a JSON config; `source` names it in error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "config") {
  return detail::ConfigParser(text, source).parse();
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

/// Shortest round-trip decimal form, so reruns give identical bytes.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Writes via a temporary sibling and a rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

struct IdentityRow {
  std::string observable;
  double h = 0.0;
  IdentityReport report;
  bool within_3se() const { return std::abs(report.residual) <= 3.0 * report.mc_se; }
};


struct OracleCheck {
  std::string name;
  double beta = 0.0;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct RunResult {
  ExperimentConfig config;
  BetaGrid grid;
  ResponseCurve curve;
  std::vector<IdentityRow> identity;
  BoundTally bounds;
  std::vector<OracleCheck> oracle;
  nlohmann::ordered_json manifest;

  bool oracle_passed() const {
    return std::all_of(oracle.begin(), oracle.end(), [](const OracleCheck& c) { return c.passed; });
  }
};

inline std::string response_csv(const ResponseCurve& curve) {
  std::string s = std::string(kResponseHeader) + "\n";
  for (const auto& r : curve.rows) {
    for (double v : {r.beta, r.m, r.m_se, r.chi, r.heat_capacity, r.p_waic, r.waic_transform, r.logZ, r.free_energy,
                     r.ess, r.accept_rate})
      s += format_number(v) + ",";
    s.back() = '\n';
  }
  return s;
}

inline std::string identity_csv(const std::vector<IdentityRow>& rows) {
  std::string s = std::string(kIdentityHeader) + "\n";
  for (const auto& r : rows) {
    s += r.observable;
    for (double v : {r.report.beta, r.h, r.report.fd_derivative, r.report.covariance, r.report.residual, r.report.mc_se})
      s += "," + format_number(v);
    s += r.within_3se() ? ",1\n" : ",0\n";
  }
  return s;
}

namespace detail {


/// Sample-vs-closed-form comparisons for a conjugate run.
inline std::vector<OracleCheck> conjugate_oracle(const ConjugateGaussianModel& model,
                                                 const ConjugateGaussianModel::Data& data, const SweepResult& sweep,
                                                 const ResponseCurve& curve, const std::string& obs_name) {
  std::vector<OracleCheck> out;
  const std::size_t coord = std::stoul(obs_name.substr(obs_name.find('_') + 1)) - 1;
  // Three ESS-adjusted standard errors of a sample variance.
  auto variance_se = [](std::span<const double> x) {
    const double mx = mean(x);
    std::vector<double> sq(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) sq[t] = (x[t] - mx) * (x[t] - mx);
    const double v = variance(sq);
    return v > 0.0 ? std::sqrt(v / effective_sample_size(sq).ess) : 0.0;
  };
  for (std::size_t k = 0; k < sweep.chains.size(); ++k) {
    const auto& chain = sweep.chains[k];
    const auto& row = curve.rows[k];
    const double b = chain.beta;
    const auto mom = conjugate_tempered_moments(model, data, b);
    const auto f = chain.samples.column(coord);
    out.push_back({"m", b, row.m, mom.mean[coord], 3.0 * row.m_se, false});
    out.push_back({"chi", b, row.chi, b * mom.variance, 3.0 * b * variance_se(f), false});
    out.push_back({"heat_capacity", b, row.heat_capacity, conjugate_loglik_variance(model, data, b),
                   3.0 * variance_se(chain.loglik_series), false});
    const double pv = conjugate_pointwise_variance_sum(model, data, b);
    out.push_back({"p_waic", b, row.p_waic, pv, 0.15 * pv, false});
    const double lz = conjugate_log_partition(model, data, b);
    out.push_back({"logZ", b, row.logZ, lz, 0.01 * std::abs(lz), false});
  }
  const std::size_t n = data.size();
  if (const auto w = sweep.grid.wbic_index) {
    const double exact = -conjugate_log_partition(model, data, 1.0);
    out.push_back({"wbic", sweep.chains[*w].beta, wbic(sweep.chains[*w], n), exact, 0.2 * std::abs(exact), false});
    if (*w > 0 && *w + 1 < sweep.chains.size()) {
      const auto& lo = sweep.chains[*w - 1];
      const auto& hi = sweep.chains[*w + 1];
      const double exact_slope = rlct_estimate(lo.beta, -conjugate_expected_loglik(model, data, lo.beta), hi.beta,
                                               -conjugate_expected_loglik(model, data, hi.beta));
      const auto elo = order_parameter(lo.loglik_series), ehi = order_parameter(hi.loglik_series);
      const double se = std::hypot(elo.se, ehi.se) / std::abs(1.0 / lo.beta - 1.0 / hi.beta);
      out.push_back({"rlct", sweep.chains[*w].beta, rlct_estimate(sweep, lo.beta, hi.beta), exact_slope, 3.0 * se,
                     false});
    }
  }
  for (auto& c : out) c.passed = std::abs(c.measured - c.expected) <= c.tolerance;
  return out;
}

inline nlohmann::ordered_json chain_summary(const ChainOutput& chain, double order_ess) {
  return {{"beta", chain.beta},
          {"accept_rate", chain.accept_rate},
          {"ess", order_ess},
          {"ess_min_coordinate",
           chain.ess_by_coordinate.empty()
               ? 0.0
               : *std::min_element(chain.ess_by_coordinate.begin(), chain.ess_by_coordinate.end())},
          {"step_size", chain.step_size_final},
          {"divergences_warmup", chain.divergences_warmup},
          {"divergences_sampling", chain.divergences_sampling}};
}

template <StatModel M>
RunResult run_model(const M& model, const typename M::Data& data, const ExperimentConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  RunResult r;
  r.config = cfg;
  r.grid = make_beta_grid(cfg.grid.beta_min, cfg.grid.beta_max, cfg.grid.k, cfg.n, cfg.grid.include_unity,
                          cfg.grid.include_wbic);
  HmcConfig hc = cfg.sampler;
  hc.seed = cfg.seed;
  const auto sweep = run_sweep(model, data, r.grid, hc, {.mode = cfg.start, .prior_chain = true, .threads = cfg.threads});
  const auto order = observable_by_name(model, cfg.observables.front());
  r.curve = build_response_curve(model, data, sweep, order);

  for (const auto& chain : sweep.chains) tally_response_bounds(r.bounds, model, data, chain);
  tally_response_bounds(r.bounds, model, data, *sweep.prior_chain);

  if (cfg.identity.temperatures > 0) {
    const double h = cfg.identity.h;
    for (double beta : identity_temperatures(r.grid, cfg.identity.temperatures)) {
      const auto k = static_cast<std::size_t>(std::find(r.grid.values.begin(), r.grid.values.end(), beta) -
                                              r.grid.values.begin());
      const auto& center = sweep.chains[k];
      HmcConfig side = hc;
      side.init_step = center.step_size_final;
      ChainOutput lo, hi;
      try {
        side.seed = derive_seed(cfg.seed, k, 1);
        lo = run_chain(model, data, beta * (1.0 - h), side, center.final_state);
        side.seed = derive_seed(cfg.seed, k, 2);
        hi = run_chain(model, data, beta * (1.0 + h), side, center.final_state);
      } catch (const SamplerError& e) {
        throw SamplerError("identity check at beta=" + format_number(beta) + ": " + e.what());
      }
      tally_response_bounds(r.bounds, model, data, lo);
      tally_response_bounds(r.bounds, model, data, hi);
      for (const auto& name : cfg.observables) {
        const auto obs = observable_by_name(model, name);
        r.identity.push_back({name, h,
                              identity_from_series(beta, h, observable_series(center, model, data, obs),
                                                   center.loglik_series, observable_series(lo, model, data, obs),
                                                   observable_series(hi, model, data, obs))});
      }
    }
  }

  if constexpr (std::is_same_v<M, ConjugateGaussianModel>)
    r.oracle = conjugate_oracle(model, data, sweep, r.curve, cfg.observables.front());

  using nlohmann::ordered_json;
  auto& m = r.manifest;
  m["version"] = kVersion;
  m["config_hash"] = config_hash(cfg);
  m["seed"] = cfg.seed;
  m["data_seed"] = data_seed(cfg);
  m["experiment"] = cfg.experiment;
  m["n"] = cfg.n;
  m["grid"] = r.grid.values;
  m["order_parameter"] = order.name;
  auto chains = ordered_json::array();
  for (std::size_t k = 0; k < sweep.chains.size(); ++k) chains.push_back(chain_summary(sweep.chains[k], r.curve.rows[k].ess));
  m["chains"] = chains;
  m["prior_chain"] = chain_summary(*sweep.prior_chain, 0.0);

  ordered_json est;
  const auto peak = find_susceptibility_peak(r.curve);
  est["susceptibility_peak"] = {{"beta", peak.beta},
                                {"chi", peak.chi},
                                {"index", peak.index},
                                {"interior", peak.index > 0 && peak.index + 1 < r.curve.rows.size()}};
  if (const auto w = r.grid.wbic_index) {
    est["wbic"] = {{"beta", r.grid.values[*w]}, {"value", wbic(sweep.chains[*w], cfg.n)}};
    if (*w > 0 && *w + 1 < r.grid.size())
      est["rlct"] = {{"beta_low", r.grid.values[*w - 1]},
                     {"beta_high", r.grid.values[*w + 1]},
                     {"value", rlct_estimate(sweep, r.grid.values[*w - 1], r.grid.values[*w + 1])}};
  }
  if (r.grid.includes_unity) {
    const auto waic = waic_complexity(chain_at(sweep, 1.0));
    est["singular_fluctuation_proxy"] = {{"beta", 1.0}, {"value", 0.5 * waic.p_waic}};
  }
  m["estimates"] = est;
  m["bound_checks"] = {{"count", r.bounds.count},
                       {"violations", r.bounds.violations},
                       {"equality_relative_gap", r.bounds.equality_gap}};
  std::size_t within = 0;
  for (const auto& row : r.identity) within += row.within_3se() ? 1 : 0;
  m["identity_checks"] = {{"count", r.identity.size()}, {"within_3se", within}};
  if (!r.oracle.empty()) {
    auto checks = ordered_json::array();
    for (const auto& c : r.oracle)
      checks.push_back({{"name", c.name},
                        {"beta", c.beta},
                        {"measured", c.measured},
                        {"expected", c.expected},
                        {"tolerance", c.tolerance},
                        {"passed", c.passed}});
    m["conjugate_oracle"] = {{"passed", r.oracle_passed()}, {"checks", checks}};
  }
  m["config"] = to_json(cfg);
  m["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return r;
}

}  // namespace detail

/// Runs one experiment in memory.
inline RunResult run_experiment(const ExperimentConfig& cfg) {
  return with_model(cfg, [&](const auto& model, const auto& data) { return detail::run_model(model, data, cfg); });
}

/// Runs one experiment and writes its three artifacts into `out`.
inline RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  std::filesystem::create_directories(out);  // before sampling, so a bad destination fails fast
  auto r = run_experiment(cfg);
  write_atomic(out / "response_curve.csv", response_csv(r.curve));
  write_atomic(out / "identity_checks.csv", identity_csv(r.identity));
  write_atomic(out / "manifest.json", r.manifest.dump(2) + "\n");
  return r;
}

struct SweepAllOutcome {
  std::string experiment;
  bool ok = false;
  std::string error;
  int exit_code = 0;
};

/// Default mixture, rrr and nn experiments into out/<name>; one failure does not stop the others.
inline std::vector<SweepAllOutcome> sweep_all(std::uint64_t seed, const std::filesystem::path& out) {
  std::vector<SweepAllOutcome> results;
  for (const std::string name : {"mixture", "rrr", "nn"}) {
    SweepAllOutcome o;
    o.experiment = name;
    try {
      auto cfg = default_config(name);
      cfg.seed = seed;
      run_experiment(cfg, out / name);
      o.ok = true;
    } catch (const SamplerError& e) {
      o.error = e.what();
      o.exit_code = 2;
    } catch (const std::exception& e) {
      o.error = e.what();
      o.exit_code = 1;
    }
    results.push_back(o);
  }
  return results;
}

}  // namespace thermo

#endif  // THERMO_EXPERIMENT_HPP

// Command-line entry point.  Exit codes: 0 success, 1 config error,
// 2 sampler failure, 3 validation failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "thermo/experiment.hpp"
#include "thermo/validation.hpp"

namespace {

constexpr int kConfigError = 1;
constexpr int kSamplerError = 2;
constexpr int kValidationError = 3;

int cmd_run(const std::string& config_path, const std::string& out_flag) {
  const auto cfg = thermo::load_config(config_path);
  const std::string out = !out_flag.empty() ? out_flag : cfg.output_dir;
  if (out.empty()) throw thermo::ConfigError(config_path + ": no output directory (pass --out or set output_dir)");
  const auto r = thermo::run_experiment(cfg, out);
  const auto peak = thermo::find_susceptibility_peak(r.curve);
  std::cout << cfg.experiment << ": " << r.curve.rows.size() << " temperatures, chi peak at beta="
            << thermo::format_number(peak.beta) << ", " << r.identity.size() << " identity checks, "
            << r.bounds.count << " bound checks (" << r.bounds.violations << " violations)\n";
  if (!r.oracle.empty()) {
    std::size_t failed = 0;
    for (const auto& c : r.oracle) failed += c.passed ? 0 : 1;
    std::cout << "conjugate oracle: " << r.oracle.size() - failed << "/" << r.oracle.size() << " within tolerance\n";
  }
  std::cout << "wrote " << out << "/{response_curve.csv,identity_checks.csv,manifest.json}\n";
  return 0;
}

int cmd_validate(std::uint64_t seed, const std::string& fault) {
  thermo::validation::Options opt;
  opt.seed = seed;
  if (fault == "gradient")
    opt.inject_gradient_fault = true;
  else if (!fault.empty())
    throw thermo::ConfigError("unknown fault '" + fault + "' (known: gradient)");
  const auto report = thermo::validation::run_validation(opt);
  std::cout << report.table();
  std::cout << report.checks.size() - report.failures() << "/" << report.checks.size() << " checks passed\n";
  return report.passed() ? 0 : kValidationError;
}

int cmd_sweep_all(std::uint64_t seed, const std::string& out) {
  int code = 0;
  for (const auto& o : thermo::sweep_all(seed, out)) {
    if (o.ok) {
      std::cout << o.experiment << ": wrote " << (std::filesystem::path(out) / o.experiment).string() << "\n";
    } else {
      std::cerr << o.experiment << ": " << o.error << "\n";
      code = std::max(code, o.exit_code);
    }
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tempered-posterior response functions for singular models"};
  app.require_subcommand(1);

  std::string config_path, out;
  auto* run = app.add_subcommand("run", "Run one experiment from a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output directory (overrides output_dir in the config)");

  std::uint64_t validate_seed = 1;
  std::string fault;
  auto* validate = app.add_subcommand("validate", "Run the oracle and invariance suite");
  validate->add_option("--seed", validate_seed, "Seed for the suite");
  validate->add_option("--inject-fault", fault, "Deliberately break a component to prove the suite catches it (gradient)");

  std::uint64_t seed = 1;
  std::string sweep_out;
  auto* all = app.add_subcommand("sweep-all", "Run the default mixture, rrr and nn experiments");
  all->add_option("--seed", seed, "Seed for all three experiments")->required();
  all->add_option("--out", sweep_out, "Parent output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kConfigError;
  }

  try {
    if (*run) return cmd_run(config_path, out);
    if (*validate) return cmd_validate(validate_seed, fault);
    return cmd_sweep_all(seed, sweep_out);
  } catch (const thermo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const thermo::SamplerError& e) {
    std::cerr << "sampler failure: " << e.what() << "\n";
    return kSamplerError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

#include <chrono>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "experiments.hpp"
#include "sgdlb/types.hpp"

namespace {

using sgdlb::cli::Config;
using sgdlb::cli::ConfigError;

struct Invocation {
  std::string experiment;
  std::string config_file;
  std::string output;
  std::string positional;
  std::vector<std::string> extras;
};

// Flags beyond --config/--output are config keys: --key value or --key=value.
void apply_extras(Config& config, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) throw ConfigError("", "unexpected argument '" + arg + "'");
    std::string key = arg.substr(2), value;
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError(key, "flag needs a value");
      value = extras[++i];
    }
    config.set(key, value);
  }
}

std::string lower_experiment(const std::string& theorem) {
  if (theorem == "prop_noise_const" || theorem == "prop_noise_floor" || theorem == "prop_noise_poly") return "prop_noise";
  if (theorem == "aggregation_step" || theorem == "nonconvex_hessian" || theorem == "prop_distance" ||
      theorem == "prop_noise" || theorem == "infdim")
    return theorem;
  throw ConfigError("theorem_id", "unknown theorem '" + theorem + "'");
}

std::string upper_experiment(const std::string& bound) {
  if (bound == "ghadimi_lan" || bound == "kappa" || bound == "gd_corollary") return bound;
  throw ConfigError("bound", "unknown bound '" + bound + "'");
}

int execute(const Invocation& inv, const std::string& subcommand) {
  using namespace sgdlb::cli;
  try {
    Config config = inv.config_file.empty() ? Config{} : Config::parse_file(inv.config_file);
    apply_extras(config, inv.extras);
    if (subcommand == "lower") {
      config.set("experiment", lower_experiment(inv.positional));
      if (!config.has("schedule")) {
        const double L = config.positive("L", 1.0);
        if (inv.positional == "prop_noise_floor") config.set("schedule", "constant:" + format_real(1.0 / L));
        if (inv.positional == "prop_noise_poly") config.set("schedule", "poly:0.5,1,0.5");
      }
    } else if (subcommand == "upper") {
      config.set("experiment", upper_experiment(inv.positional));
    } else if (subcommand == "interpolate") {
      config.set("experiment", "interpolate");
      config.set("set_file", inv.positional);
    } else if (subcommand != "run") {
      config.set("experiment", subcommand);
    }
    const auto start = std::chrono::steady_clock::now();
    const ExperimentResult result = run_experiment(config);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::string prefix = inv.output.empty() ? "results/" + result.experiment : inv.output;
    write_outputs(result, prefix, wall);
    for (const auto& r : result.reports)
      std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << ": theoretical " << format_real(r.theoretical)
                << ", empirical " << format_real(r.empirical) << " (" << to_string(r.sense) << ")\n";
    std::cout << "wrote " << prefix << ".csv and " << prefix << ".json\n";
    return result.passed() ? exit_pass : exit_verification_failure;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: invalid parameters: " << e.what() << "\n";
    return exit_config_error;
  } catch (const sgdlb::ToleranceError& e) {
    std::cerr << "error: tolerance not reached: " << e.what() << "\n";
    return exit_tolerance_failure;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return exit_tolerance_failure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SGD lower-bound instances, bounds and verifiers"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    const char* positional;
  };
  const std::vector<Sub> subs{
      {"simulate", "run SGD on a built-in objective", nullptr},
      {"lower", "build and verify a lower-bound instance", "theorem_id"},
      {"upper", "compare simulated runs against an upper bound", "bound"},
      {"tightness", "lower bound, empirical value and upper bound at the tuned step", nullptr},
      {"concentration", "Monte Carlo check of the chi-square tail bound", nullptr},
      {"interpolate", "check and evaluate the bounded interpolant of a set file", "set-file"},
      {"impossibility", "fixed-point construction against a deterministic method", nullptr},
      {"plot-data", "write curve and sweep series", nullptr},
      {"run", "run the experiment named in the config", nullptr},
  };
  std::vector<Invocation> invocations(subs.size());
  std::vector<CLI::App*> apps;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    CLI::App* sub = app.add_subcommand(subs[i].name, subs[i].help);
    sub->allow_extras();
    sub->add_option("--config", invocations[i].config_file, "key = value config file");
    sub->add_option("--output", invocations[i].output, "output path prefix");
    if (subs[i].positional) sub->add_option(subs[i].positional, invocations[i].positional)->required();
    apps.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sgdlb::cli::exit_config_error;
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!apps[i]->parsed()) continue;
    invocations[i].extras = apps[i]->remaining();
    return execute(invocations[i], subs[i].name);
  }
  return sgdlb::cli::exit_config_error;
}

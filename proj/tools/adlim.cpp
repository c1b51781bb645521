// Command-line front end: every experiment reads one config file and writes
// CSV plus a short pass/fail summary.  Exit codes: 0 ok, 1 usage or config,
// 2 numerical failure, 3 threshold failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "adlim/config.hpp"
#include "adlim/errors.hpp"
#include "adlim/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"spectral studies of thin-fibre Schrodinger operators"};
  app.require_subcommand(1);

  const std::map<std::string, std::string> kinds = {
      {"bands", "fibre band functions and the uniform gap certificate"},
      {"effective", "effective potential and the adiabatic spectrum"},
      {"projections", "almost-invariant projections and their defects"},
      {"convergence", "full vs effective spectra across the sweep"},
      {"dynamics", "propagation error of the effective dynamics"},
      {"full", "windowed spectrum of the full operator"},
      {"verify", "internal invariant checks, one line per check"},
  };

  std::string config_path;
  std::string out_dir;
  std::vector<double> eps;
  std::uint64_t seed = 0;
  for (const auto& [name, desc] : kinds) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "experiment config file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--eps", eps,
                    "comma-separated epsilon sweep (overrides config)")
        ->delimiter(',');
    sub->add_option("--seed", seed, "RNG seed (overrides config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string kind = sub->get_name();
  try {
    adlim::ExperimentConfig cfg = adlim::load_config(config_path);
    if (sub->count("--out") > 0) cfg.out_dir = out_dir;
    if (sub->count("--eps") > 0) {
      if (eps.empty()) throw adlim::ConfigError("--eps list is empty");
      for (std::size_t i = 0; i < eps.size(); ++i) {
        if (!(eps[i] > 0.0)) {
          throw adlim::ConfigError("--eps values must be positive");
        }
        if (i > 0 && !(eps[i] < eps[i - 1])) {
          throw adlim::ConfigError("--eps values must be strictly decreasing");
        }
      }
      cfg.epsilons = eps;
    }
    if (sub->count("--seed") > 0) cfg.seed = seed;

    adlim::SpectralReport rep = adlim::run_experiment(cfg, kind);
    std::printf("== %s ==\n", rep.kind.c_str());
    for (const std::string& line : rep.lines) {
      std::printf("%s\n", line.c_str());
    }
    std::printf("RESULT: %s\n", rep.passed ? "OK" : "FAIL");
    return rep.passed ? 0 : 3;
  } catch (const adlim::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const adlim::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const adlim::ThresholdError& e) {
    std::fprintf(stderr, "threshold error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

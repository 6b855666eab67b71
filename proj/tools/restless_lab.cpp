// Command-line entry point: loads a flat key-value config, applies flag
// overrides, validates, and runs the requested experiment mode.
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "restless/config.hpp"
#include "restless/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"restless-lab: seeded intervention-scheduling experiments"};
  std::string config_path;
  std::string mode;
  std::string out_dir;
  std::string seeds;
  std::string policy;
  bool dry_run = false;

  app.add_option("--config", config_path, "Config file of `key = value` lines (# comments)")
      ->check(CLI::ExistingFile);
  app.add_option("--mode", mode, "synthetic | replay | markov_order | forecast_eval");
  app.add_option("--out", out_dir, "Output directory (default: out)");
  app.add_option("--seeds", seeds, "Comma-separated seed list, e.g. 1,2,3");
  app.add_option("--policy", policy, "Run a single policy, overriding the config list");
  app.add_flag("--dry-run", dry_run, "Validate the configuration and exit");
  CLI11_PARSE(app, argc, argv);

  try {
    restless::Config raw = config_path.empty() ? restless::Config{}
                                               : restless::Config::parse_file(config_path);
    if (!mode.empty()) raw.set("mode", mode);
    if (!out_dir.empty()) raw.set("out", out_dir);
    if (!seeds.empty()) raw.set("seeds", seeds);
    if (!policy.empty()) raw.set("policy", policy);

    const restless::ExperimentConfig cfg = restless::experiment_from_config(raw);
    const std::vector<std::string> diags = restless::validate_experiment(cfg);
    bool has_error = false;
    for (const std::string& d : diags) {
      std::cerr << d << '\n';
      if (d.rfind("error: ", 0) == 0) has_error = true;
    }
    if (dry_run) {
      std::cout << (has_error ? "config has errors" : "config ok") << '\n';
      return has_error ? 1 : 0;
    }
    if (has_error) return 1;

    const int status = restless::run_experiment(cfg);
    std::cout << "wrote " << cfg.out_dir << '\n';
    return status;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

// Configuration-driven experiment runner: builds populations or loads
// datasets, trains forecasters, runs episodes or replays per (policy, seed),
// and writes episode CSVs, metric JSONs, and the aggregate table.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "restless/config.hpp"
#include "restless/synthgen.hpp"

namespace restless {

struct ExperimentConfig {
  std::string mode = "synthetic";  // synthetic | replay | markov_order | forecast_eval
  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds = {1};
  std::vector<std::string> policies = {"tari", "whittle", "round_robin", "random", "control"};

  // Dataset paths (replay / markov_order / forecast_eval).
  std::string trajectories_csv;
  std::string features_csv;

  // Metrics: synthetic engagement reporting skips Random-kind arms unless
  // this flag is set, since their states are pure noise.
  bool include_random = false;

  // Problem instance.
  int n_arms = 90;
  int budget = 0;                 // 0 = derive from budget_fraction
  double budget_fraction = 0.1;
  int horizon = 52;
  double threshold = 0.25;

  // Synthetic historical data used for model fitting.
  int historical_per_kind = 30;
  int historical_length = 52;
  std::uint64_t historical_seed = 1234;
  PerturbKind perturb = PerturbKind::signed_magnitude;

  // Forecaster.
  int h = 7;
  double ridge = 1e-4;
  int tari_horizon = 0;  // 0 = instance horizon

  // Whittle baseline.
  int whittle_bins = 2;
  int whittle_history = 1;
  double whittle_gamma = 0.9;
  int whittle_clusters = 3;

  // Replay.
  std::string replay_method = "full_counterfactual";
  int observation_weeks = 0;  // 0 = forecaster window

  // Markov-order diagnostic.
  int max_order = 7;
  int markov_bins = 2;

  // Forecast evaluation.
  int steps_ahead = 3;
};

// Maps flat dotted config keys onto an ExperimentConfig; unknown keys are an
// error so typos surface instead of silently using defaults.
ExperimentConfig experiment_from_config(const Config& raw);

// Dry-run checks: referenced paths, budget vs arm count, window length vs
// trajectory length, known mode and policy names. Returns diagnostics;
// empty means the config is runnable.
std::vector<std::string> validate_experiment(const ExperimentConfig& cfg);

// Executes the experiment; creates <out>/<policy>/<seed>/episode.csv and
// metrics.json per job plus <out>/aggregate.csv (or the mode's diagnostic
// CSV). Returns 0 on success, throws on error.
int run_experiment(const ExperimentConfig& cfg);

}  // namespace restless

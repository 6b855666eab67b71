// Experiment orchestration: maps flat config keys onto runnable jobs, shares
// fitted assets (forecaster, transition model) across jobs, and writes the
// per-job episode/metric files plus the cross-seed aggregate table.
#include "restless/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "restless/csv.hpp"
#include "restless/forecast.hpp"
#include "restless/markov.hpp"
#include "restless/parallel.hpp"
#include "restless/policies.hpp"
#include "restless/simulate.hpp"

namespace restless {

namespace fs = std::filesystem;

namespace {

// Stream label for the train/val/test arm shuffle; distinct from the agent
// parameter (0x5a), dynamics (0xd1) and call-schedule (0x5c) streams.
constexpr std::uint64_t kSplitStream = 0x59117;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "mode",
      "out",
      "seeds",
      "policies",
      "policy",
      "data.trajectories",
      "data.features",
      "metrics.include_random",
      "instance.n_arms",
      "instance.budget",
      "instance.budget_fraction",
      "instance.horizon",
      "instance.threshold",
      "synthetic.historical_per_kind",
      "synthetic.historical_length",
      "synthetic.historical_seed",
      "synthetic.perturb",
      "forecast.ridge",
      "tari.h",
      "tari.horizon",
      "whittle.bins",
      "whittle.history",
      "whittle.gamma",
      "whittle.clusters",
      "replay.method",
      "replay.observation_weeks",
      "markov.max_order",
      "markov.bins",
      "forecast_eval.steps_ahead",
  };
  return keys;
}

PerturbKind perturb_from_string(const std::string& s) {
  if (s == "signed_magnitude") return PerturbKind::signed_magnitude;
  if (s == "symmetric_interval") return PerturbKind::symmetric_interval;
  throw std::invalid_argument("synthetic.perturb must be signed_magnitude or symmetric_interval, got: " + s);
}

int checked_int(const Config& raw, const std::string& key, std::int64_t fallback) {
  const std::int64_t v = raw.get_int(key, fallback);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw std::invalid_argument("config value out of int range for key: " + key);
  return static_cast<int>(v);
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : xs) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// One finished job's named summary values, in first-appearance order.
struct ScalarRow {
  std::string policy;
  std::vector<std::pair<std::string, double>> scalars;
};

// Fills the scalar summary of a report from its series and the five
// engagement-improvement metrics; replay-only extras are appended by callers.
void fill_scalars(MetricReport& r) {
  r.scalars.clear();
  r.scalars.emplace_back("mean_engaged_fraction", mean_of(r.engaged_fraction));
  if (!r.cumulative_drops_prevented_vs_control.empty())
    r.scalars.emplace_back("final_drops_prevented",
                           r.cumulative_drops_prevented_vs_control.back());
  if (!r.critical_reached_pct.empty())
    r.scalars.emplace_back("final_critical_reached_pct", r.critical_reached_pct.back());
  r.scalars.emplace_back("mean_weekly_engagement_improvement",
                         r.improvement.mean_weekly_engagement_improvement);
  r.scalars.emplace_back("mean_relative_engagement_improvement_pct",
                         r.improvement.mean_relative_engagement_improvement_pct);
  r.scalars.emplace_back("cumulative_additional_engagement",
                         r.improvement.cumulative_additional_engagement);
  r.scalars.emplace_back("cumulative_additional_duration_seconds",
                         r.improvement.cumulative_additional_duration_seconds);
  if (r.improvement.relative_defined)
    r.scalars.emplace_back("relative_cumulative_engagement_pct",
                           r.improvement.relative_cumulative_engagement_pct);
}

// Long-format aggregate: `policy,metric,mean,std` with the sample standard
// deviation across seeds. Policies keep config order; metrics keep
// first-appearance order within each policy.
void write_aggregate_csv(const std::string& path, const std::vector<std::string>& policy_order,
                         const std::vector<ScalarRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "policy,metric,mean,std\n";
  for (const std::string& policy : policy_order) {
    std::vector<std::string> metric_order;
    std::map<std::string, std::vector<double>> by_metric;
    for (const ScalarRow& row : rows) {
      if (row.policy != policy) continue;
      for (const auto& [name, value] : row.scalars) {
        auto [it, inserted] = by_metric.try_emplace(name);
        if (inserted) metric_order.push_back(name);
        it->second.push_back(value);
      }
    }
    for (const std::string& name : metric_order) {
      const std::vector<double>& vals = by_metric[name];
      const double m = mean_of(vals);
      out << policy << ',' << name << ',' << format_double(m) << ','
          << format_double(sample_std_of(vals, m)) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed while writing: " + path);
}

std::string job_dir(const ExperimentConfig& cfg, const std::string& policy, std::uint64_t seed) {
  return (fs::path(cfg.out_dir) / policy / std::to_string(seed)).string();
}

bool is_known_policy(const std::string& name) {
  static const std::set<std::string> names = {"tari",   "tari_oracle", "whittle",   "round_robin",
                                              "random", "control",     "historical"};
  return names.count(name) != 0;
}

// Everything jobs can share read-only.
struct SharedAssets {
  std::optional<LinearARModel> forecaster;       // policy-side model
  std::optional<WhittleModel> whittle_model;
  std::optional<WhittleIndexCache> whittle_cache;
  const std::vector<Trajectory>* dataset = nullptr;  // replay only
};

std::unique_ptr<Policy> make_policy(const std::string& name, const SharedAssets& assets,
                                    const std::vector<AgentSpec>* population, int window,
                                    int tari_horizon) {
  if (name == "control") return std::make_unique<ControlPolicy>();
  if (name == "random") return std::make_unique<RandomPolicy>();
  if (name == "round_robin") return std::make_unique<RoundRobinPolicy>();
  if (name == "historical") {
    if (assets.dataset == nullptr)
      throw std::invalid_argument("historical policy requires replay mode");
    return std::make_unique<HistoricalPolicy>(assets.dataset);
  }
  if (name == "tari") {
    if (!assets.forecaster) throw std::logic_error("tari policy requested without a forecaster");
    return std::make_unique<TariPolicy>(&*assets.forecaster, tari_horizon);
  }
  if (name == "tari_oracle") {
    if (population == nullptr)
      throw std::invalid_argument("tari_oracle policy requires synthetic mode");
    return std::make_unique<OracleTariPolicy>(*population, window, tari_horizon);
  }
  if (name == "whittle") {
    if (!assets.whittle_model)
      throw std::logic_error("whittle policy requested without a transition model");
    return std::make_unique<WhittlePolicy>(*assets.whittle_model, *assets.whittle_cache);
  }
  throw std::invalid_argument("unknown policy: " + name);
}

// ---------------------------------------------------------------------------
// synthetic mode
// ---------------------------------------------------------------------------

int run_synthetic_mode(const ExperimentConfig& cfg) {
  const EngagementState thr(cfg.threshold);
  const int k = cfg.budget > 0 ? cfg.budget : budget_from_fraction(cfg.n_arms, cfg.budget_fraction);
  const ProblemInstance instance(cfg.n_arms, k, cfg.horizon, thr);
  const int tari_horizon = cfg.tari_horizon > 0 ? cfg.tari_horizon : cfg.horizon;

  const bool need_forecaster = std::count(cfg.policies.begin(), cfg.policies.end(), "tari") > 0;
  const bool need_whittle = std::count(cfg.policies.begin(), cfg.policies.end(), "whittle") > 0;

  SharedAssets assets;
  if (need_forecaster || need_whittle) {
    const std::vector<Trajectory> historical = generate_historical_dataset(
        cfg.historical_per_kind, cfg.historical_length, GenMode::train, cfg.historical_seed,
        cfg.perturb);
    if (need_forecaster)
      assets.forecaster = fit_linear_ar(build_windows(historical, cfg.h), cfg.ridge);
    if (need_whittle) {
      const Discretizer disc(cfg.whittle_bins, thr);
      assets.whittle_model =
          estimate_transitions(historical, disc, cfg.whittle_history, cfg.whittle_clusters,
                               cfg.whittle_gamma, cfg.historical_seed);
      assets.whittle_cache = build_whittle_cache(*assets.whittle_model);
    }
  }

  // Random-kind arms carry no signal; keep them out of the engagement series
  // unless explicitly included.
  std::vector<char> exclude(cfg.n_arms, 0);
  if (!cfg.include_random)
    for (int i = 0; i < cfg.n_arms; ++i)
      exclude[i] = kind_of_arm(i) == AgentKind::random_agent ? 1 : 0;

  // Shared per-seed population and the all-passive reference run.
  std::vector<std::vector<AgentSpec>> populations(cfg.seeds.size());
  std::vector<EpisodeLog> controls(cfg.seeds.size());
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    populations[si] = sample_population(cfg.n_arms / 3, GenMode::test, cfg.seeds[si], cfg.perturb);
    ControlPolicy control;
    controls[si] = run_synthetic_episode(instance, populations[si], control, cfg.seeds[si]);
  }

  std::vector<ScalarRow> rows(cfg.policies.size() * cfg.seeds.size());
  for (const std::string& policy : cfg.policies)
    for (std::uint64_t seed : cfg.seeds) fs::create_directories(job_dir(cfg, policy, seed));

  for (std::size_t job = 0; job < rows.size(); ++job) {
    const std::size_t pi = job / cfg.seeds.size();
    const std::size_t si = job % cfg.seeds.size();
    const std::string& name = cfg.policies[pi];
    const std::uint64_t seed = cfg.seeds[si];

    std::unique_ptr<Policy> policy =
        make_policy(name, assets, &populations[si], cfg.h, tari_horizon);
    const EpisodeLog log = name == "control"
                               ? controls[si]
                               : run_synthetic_episode(instance, populations[si], *policy, seed);
    validate_budget(log);

    MetricReport report;
    report.engaged_fraction = engaged_fraction(log, thr, exclude);
    report.cumulative_drops_prevented_vs_control = drops_prevented(log, controls[si], thr);
    report.improvement = improvement_metrics(log, controls[si], thr);
    fill_scalars(report);

    const std::string dir = job_dir(cfg, name, seed);
    write_episode_csv((fs::path(dir) / "episode.csv").string(), log);
    write_metric_report_json((fs::path(dir) / "metrics.json").string(), report);
    rows[job] = ScalarRow{name, report.scalars};
  }

  write_aggregate_csv((fs::path(cfg.out_dir) / "aggregate.csv").string(), cfg.policies, rows);
  return 0;
}

// ---------------------------------------------------------------------------
// replay mode
// ---------------------------------------------------------------------------

ReplayMethod replay_method_from_string(const std::string& s) {
  if (s == "full_counterfactual") return ReplayMethod::full_counterfactual;
  if (s == "remove_on_deviation") return ReplayMethod::remove_on_deviation;
  throw std::invalid_argument(
      "replay.method must be full_counterfactual or remove_on_deviation, got: " + s);
}

int run_replay_mode(const ExperimentConfig& cfg) {
  const EngagementState thr(cfg.threshold);
  std::vector<Trajectory> dataset = read_trajectories_csv(cfg.trajectories_csv);
  if (!cfg.features_csv.empty()) attach_features_csv(cfg.features_csv, dataset);
  if (dataset.empty()) throw std::invalid_argument("replay dataset is empty");
  const int traj_len = static_cast<int>(dataset.front().steps.size());
  for (const Trajectory& tr : dataset)
    if (static_cast<int>(tr.steps.size()) != traj_len)
      throw std::invalid_argument("replay requires uniform trajectory lengths; arm " +
                                  std::to_string(tr.arm_id) + " differs");
  const int tari_horizon = cfg.tari_horizon > 0 ? cfg.tari_horizon : traj_len;

  // The counterfactual simulator sees every window; the planning forecaster
  // only ever sees the training arms, mirroring a real deployment.
  const std::vector<WindowSample> all_windows = build_windows(dataset, cfg.h);
  const LinearARModel counterfactual = fit_linear_ar(all_windows, cfg.ridge);

  SharedAssets assets;
  assets.dataset = &dataset;
  if (std::count(cfg.policies.begin(), cfg.policies.end(), "tari") > 0) {
    Rng split_rng(derive_seed(cfg.historical_seed, 0, kSplitStream));
    const DatasetSplit split = split_dataset(all_windows, split_rng);
    assets.forecaster = fit_linear_ar(split.train, cfg.ridge);
  }
  if (std::count(cfg.policies.begin(), cfg.policies.end(), "whittle") > 0) {
    const Discretizer disc(cfg.whittle_bins, thr);
    // Without an attached feature file every arm looks identical, so pool all
    // arms into a single transition model.
    const int clusters = cfg.features_csv.empty() ? 1 : cfg.whittle_clusters;
    assets.whittle_model = estimate_transitions(dataset, disc, cfg.whittle_history, clusters,
                                                cfg.whittle_gamma, cfg.historical_seed);
    assets.whittle_cache = build_whittle_cache(*assets.whittle_model);
  }

  const std::vector<int> critical =
      traj_len >= 12 ? critical_beneficiaries(dataset, thr) : std::vector<int>{};

  ReplayConfig replay_cfg;
  replay_cfg.method = replay_method_from_string(cfg.replay_method);
  replay_cfg.counterfactual_model = &counterfactual;
  replay_cfg.observation_weeks = cfg.observation_weeks;
  replay_cfg.threshold = thr;

  // The no-calls reference run for drops-prevented and the improvement
  // metrics, replayed under the same counterfactual simulator.
  std::vector<EpisodeLog> controls(cfg.seeds.size());
  for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
    ControlPolicy control;
    controls[si] =
        replay_offline(dataset, control, replay_cfg, cfg.budget_fraction, cfg.seeds[si]);
  }

  std::vector<ScalarRow> rows(cfg.policies.size() * cfg.seeds.size());
  for (const std::string& policy : cfg.policies)
    for (std::uint64_t seed : cfg.seeds) fs::create_directories(job_dir(cfg, policy, seed));

  for (std::size_t job = 0; job < rows.size(); ++job) {
    const std::size_t pi = job / cfg.seeds.size();
    const std::size_t si = job % cfg.seeds.size();
    const std::string& name = cfg.policies[pi];
    const std::uint64_t seed = cfg.seeds[si];

    std::unique_ptr<Policy> policy = make_policy(name, assets, nullptr, cfg.h, tari_horizon);
    ReplayStats stats;
    const EpisodeLog log =
        name == "control" ? controls[si]
                          : replay_offline(dataset, *policy, replay_cfg, cfg.budget_fraction,
                                           seed, &stats);
    validate_budget(log);

    MetricReport report;
    report.engaged_fraction = engaged_fraction(log, thr);
    report.cumulative_drops_prevented_vs_control = drops_prevented(log, controls[si], thr);
    if (!critical.empty()) report.critical_reached_pct = critical_reached(log, critical);
    report.improvement = improvement_metrics(log, controls[si], thr);
    fill_scalars(report);
    report.scalars.emplace_back("counterfactual_calls",
                                static_cast<double>(stats.counterfactual_calls));
    report.scalars.emplace_back("final_pool_size", static_cast<double>(stats.final_pool_size));

    const std::string dir = job_dir(cfg, name, seed);
    write_episode_csv((fs::path(dir) / "episode.csv").string(), log);
    write_metric_report_json((fs::path(dir) / "metrics.json").string(), report);
    rows[job] = ScalarRow{name, report.scalars};
  }

  write_aggregate_csv((fs::path(cfg.out_dir) / "aggregate.csv").string(), cfg.policies, rows);
  return 0;
}

// ---------------------------------------------------------------------------
// diagnostic modes
// ---------------------------------------------------------------------------

std::vector<Trajectory> load_or_generate(const ExperimentConfig& cfg) {
  if (!cfg.trajectories_csv.empty()) {
    std::vector<Trajectory> trajs = read_trajectories_csv(cfg.trajectories_csv);
    if (!cfg.features_csv.empty()) attach_features_csv(cfg.features_csv, trajs);
    return trajs;
  }
  return generate_historical_dataset(cfg.historical_per_kind, cfg.historical_length,
                                     GenMode::train, cfg.historical_seed, cfg.perturb);
}

int run_markov_order_mode(const ExperimentConfig& cfg) {
  const std::vector<Trajectory> trajs = load_or_generate(cfg);
  const Discretizer disc(cfg.markov_bins, EngagementState(cfg.threshold));
  const LikelihoodReport report = likelihood_report(trajs, cfg.max_order, disc);
  write_likelihood_csv((fs::path(cfg.out_dir) / "markov.csv").string(), report);
  return 0;
}

int run_forecast_eval_mode(const ExperimentConfig& cfg) {
  const std::vector<Trajectory> trajs = load_or_generate(cfg);
  const std::vector<WindowSample> windows = build_windows(trajs, cfg.h);
  Rng split_rng(derive_seed(cfg.historical_seed, 0, kSplitStream));
  const DatasetSplit split = split_dataset(windows, split_rng);
  const LinearARModel model = fit_linear_ar(split.train, cfg.ridge);

  std::set<int> test_arms;
  for (const WindowSample& w : split.test) test_arms.insert(w.arm_id);
  std::vector<Trajectory> test_trajs;
  for (const Trajectory& tr : trajs)
    if (test_arms.count(tr.arm_id) != 0) test_trajs.push_back(tr);

  const std::string csv_path = (fs::path(cfg.out_dir) / "forecast_eval.csv").string();
  std::ofstream out(csv_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + csv_path);
  out << "steps_ahead,mae\n";
  for (int s = 1; s <= cfg.steps_ahead; ++s)
    out << s << ',' << format_double(walk_forward_mae(model, test_trajs, cfg.h, s)) << '\n';
  if (!out) throw std::runtime_error("failed while writing: " + csv_path);
  out.close();

  model.save((fs::path(cfg.out_dir) / "model.txt").string());
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// config mapping / validation / dispatch
// ---------------------------------------------------------------------------

ExperimentConfig experiment_from_config(const Config& raw) {
  for (const auto& [key, value] : raw.values())
    if (known_keys().count(key) == 0)
      throw std::invalid_argument("unknown config key: " + key);

  ExperimentConfig cfg;
  cfg.mode = raw.get_string("mode", cfg.mode);
  cfg.out_dir = raw.get_string("out", cfg.out_dir);
  if (raw.has("seeds")) {
    cfg.seeds.clear();
    for (std::int64_t s : raw.get_int_list("seeds")) {
      if (s < 0) throw std::invalid_argument("seeds must be non-negative");
      cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (raw.has("policies")) cfg.policies = raw.get_string_list("policies");
  if (raw.has("policy")) cfg.policies = {raw.get_string("policy")};

  cfg.trajectories_csv = raw.get_string("data.trajectories", cfg.trajectories_csv);
  cfg.features_csv = raw.get_string("data.features", cfg.features_csv);
  cfg.include_random = raw.get_bool("metrics.include_random", cfg.include_random);

  cfg.n_arms = checked_int(raw, "instance.n_arms", cfg.n_arms);
  cfg.budget = checked_int(raw, "instance.budget", cfg.budget);
  cfg.budget_fraction = raw.get_double("instance.budget_fraction", cfg.budget_fraction);
  cfg.horizon = checked_int(raw, "instance.horizon", cfg.horizon);
  cfg.threshold = raw.get_double("instance.threshold", cfg.threshold);

  cfg.historical_per_kind =
      checked_int(raw, "synthetic.historical_per_kind", cfg.historical_per_kind);
  cfg.historical_length = checked_int(raw, "synthetic.historical_length", cfg.historical_length);
  cfg.historical_seed = static_cast<std::uint64_t>(
      raw.get_int("synthetic.historical_seed", static_cast<std::int64_t>(cfg.historical_seed)));
  if (raw.has("synthetic.perturb"))
    cfg.perturb = perturb_from_string(raw.get_string("synthetic.perturb"));

  cfg.ridge = raw.get_double("forecast.ridge", cfg.ridge);
  cfg.h = checked_int(raw, "tari.h", cfg.h);
  cfg.tari_horizon = checked_int(raw, "tari.horizon", cfg.tari_horizon);

  cfg.whittle_bins = checked_int(raw, "whittle.bins", cfg.whittle_bins);
  cfg.whittle_history = checked_int(raw, "whittle.history", cfg.whittle_history);
  cfg.whittle_gamma = raw.get_double("whittle.gamma", cfg.whittle_gamma);
  cfg.whittle_clusters = checked_int(raw, "whittle.clusters", cfg.whittle_clusters);

  cfg.replay_method = raw.get_string("replay.method", cfg.replay_method);
  cfg.observation_weeks = checked_int(raw, "replay.observation_weeks", cfg.observation_weeks);

  cfg.max_order = checked_int(raw, "markov.max_order", cfg.max_order);
  cfg.markov_bins = checked_int(raw, "markov.bins", cfg.markov_bins);
  cfg.steps_ahead = checked_int(raw, "forecast_eval.steps_ahead", cfg.steps_ahead);
  return cfg;
}

std::vector<std::string> validate_experiment(const ExperimentConfig& cfg) {
  std::vector<std::string> diags;
  auto error = [&diags](const std::string& msg) { diags.push_back("error: " + msg); };
  auto warning = [&diags](const std::string& msg) { diags.push_back("warning: " + msg); };

  const bool known_mode = cfg.mode == "synthetic" || cfg.mode == "replay" ||
                          cfg.mode == "markov_order" || cfg.mode == "forecast_eval";
  if (!known_mode) error("unknown mode: " + cfg.mode);
  if (cfg.seeds.empty()) error("seed list is empty");
  if (cfg.out_dir.empty()) error("output directory is empty");
  if (cfg.threshold < 0.0 || cfg.threshold > 1.0)
    error("instance.threshold must lie in [0, 1]");
  if (cfg.h < 1) error("tari.h must be >= 1");
  if (cfg.ridge < 0.0) error("forecast.ridge must be >= 0");
  if (cfg.tari_horizon < 0) error("tari.horizon must be >= 0 (0 = episode horizon)");
  if (cfg.whittle_bins < 2) error("whittle.bins must be >= 2");
  if (cfg.whittle_history < 1) error("whittle.history must be >= 1");
  if (cfg.whittle_clusters < 1) error("whittle.clusters must be >= 1");
  if (cfg.whittle_gamma <= 0.0 || cfg.whittle_gamma >= 1.0)
    error("whittle.gamma must lie in (0, 1)");
  if (cfg.max_order < 1) error("markov.max_order must be >= 1");
  if (cfg.markov_bins < 2) error("markov.bins must be >= 2");
  if (cfg.steps_ahead < 1) error("forecast_eval.steps_ahead must be >= 1");
  if (cfg.observation_weeks < 0)
    error("replay.observation_weeks must be >= 0 (0 = forecaster window)");

  for (const std::string& policy : cfg.policies) {
    if (!is_known_policy(policy)) {
      error("unknown policy: " + policy);
      continue;
    }
    if (policy == "historical" && cfg.mode != "replay")
      error("policy 'historical' requires replay mode");
    if (policy == "tari_oracle" && cfg.mode != "synthetic")
      error("policy 'tari_oracle' requires synthetic mode (it needs ground-truth agents)");
  }
  if (cfg.policies.empty()) error("policy list is empty");

  for (const std::string& path : {cfg.trajectories_csv, cfg.features_csv})
    if (!path.empty() && !fs::exists(path)) error("referenced path does not exist: " + path);

  if (cfg.mode == "synthetic") {
    if (cfg.n_arms < 1) error("instance.n_arms must be >= 1");
    if (cfg.n_arms % 3 != 0)
      error("instance.n_arms must be divisible by 3 (population cycles three agent kinds)");
    if (cfg.horizon < 1) error("instance.horizon must be >= 1");
    if (cfg.budget < 0) error("instance.budget must be >= 0 (0 = derive from fraction)");
    if (cfg.budget == 0 && (cfg.budget_fraction <= 0.0 || cfg.budget_fraction > 1.0))
      error("instance.budget_fraction must lie in (0, 1]");
    if (cfg.n_arms >= 1 && cfg.n_arms % 3 == 0) {
      const int k =
          cfg.budget > 0 ? cfg.budget : budget_from_fraction(cfg.n_arms, cfg.budget_fraction);
      if (k < 1 || k > cfg.n_arms)
        error("budget " + std::to_string(k) +
              " violates the problem-instance invariant 1 <= k <= n_arms");
    }
  }
  if (cfg.mode == "synthetic" || cfg.trajectories_csv.empty()) {
    if (cfg.historical_per_kind < 1) error("synthetic.historical_per_kind must be >= 1");
    if (cfg.historical_length < 2) error("synthetic.historical_length must be >= 2");
    if (cfg.historical_length < cfg.h + 1 && known_mode && cfg.mode != "replay")
      warning("tari.h >= synthetic.historical_length leaves no training windows");
  }

  if (cfg.mode == "replay") {
    if (cfg.trajectories_csv.empty()) {
      error("replay mode requires data.trajectories");
    } else if (fs::exists(cfg.trajectories_csv)) {
      try {
        const std::vector<Trajectory> trajs = read_trajectories_csv(cfg.trajectories_csv);
        if (trajs.empty()) {
          error("replay dataset is empty: " + cfg.trajectories_csv);
        } else {
          const int traj_len = static_cast<int>(trajs.front().steps.size());
          for (const Trajectory& tr : trajs)
            if (static_cast<int>(tr.steps.size()) != traj_len) {
              error("replay requires uniform trajectory lengths");
              break;
            }
          if (cfg.h + 1 > traj_len)
            warning("tari.h >= trajectory length leaves no training windows");
          const int obs = cfg.observation_weeks > 0 ? cfg.observation_weeks : cfg.h;
          if (obs >= traj_len)
            warning("observation window covers the whole dataset; nothing to replay");
        }
      } catch (const std::exception& e) {
        error(std::string("cannot read replay dataset: ") + e.what());
      }
    }
    if (cfg.budget_fraction <= 0.0 || cfg.budget_fraction > 1.0)
      error("instance.budget_fraction must lie in (0, 1]");
    if (cfg.budget > 0)
      warning("instance.budget is ignored in replay mode; the budget is "
              "instance.budget_fraction x remaining pool");
    if (cfg.replay_method != "full_counterfactual" && cfg.replay_method != "remove_on_deviation")
      error("replay.method must be full_counterfactual or remove_on_deviation");
  }

  if (cfg.mode == "forecast_eval" && !cfg.trajectories_csv.empty() &&
      fs::exists(cfg.trajectories_csv)) {
    try {
      const std::vector<Trajectory> trajs = read_trajectories_csv(cfg.trajectories_csv);
      std::set<int> arms;
      for (const Trajectory& tr : trajs) arms.insert(tr.arm_id);
      if (arms.size() < 3) error("forecast_eval needs at least 3 arms to split train/val/test");
      for (const Trajectory& tr : trajs)
        if (static_cast<int>(tr.steps.size()) < cfg.h + 1) {
          warning("some trajectories are shorter than tari.h + 1 and yield no windows");
          break;
        }
    } catch (const std::exception& e) {
      error(std::string("cannot read dataset: ") + e.what());
    }
  }
  return diags;
}

int run_experiment(const ExperimentConfig& cfg) {
  const std::vector<std::string> diags = validate_experiment(cfg);
  std::string errors;
  for (const std::string& d : diags)
    if (d.rfind("error: ", 0) == 0) errors += (errors.empty() ? "" : "; ") + d;
  if (!errors.empty()) throw std::invalid_argument("invalid experiment config: " + errors);

  fs::create_directories(cfg.out_dir);
  if (cfg.mode == "synthetic") return run_synthetic_mode(cfg);
  if (cfg.mode == "replay") return run_replay_mode(cfg);
  if (cfg.mode == "markov_order") return run_markov_order_mode(cfg);
  if (cfg.mode == "forecast_eval") return run_forecast_eval_mode(cfg);
  throw std::invalid_argument("unknown mode: " + cfg.mode);  // unreachable after validation
}

}  // namespace restless

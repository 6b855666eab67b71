// Episode engine for synthetic populations, counterfactual replay of offline
// trajectory datasets, and the engagement metric suite.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "restless/core.hpp"
#include "restless/forecast.hpp"
#include "restless/policies.hpp"
#include "restless/rng.hpp"
#include "restless/synthgen.hpp"

namespace restless {

// Complete record of one run: per-timestep per-arm states and actions, the
// expected per-timestep action budget, and (for replay) which arms were
// still in the simulation at each timestep.
struct EpisodeLog {
  std::string policy;
  std::uint64_t seed = 0;
  int n_arms = 0;
  EngagementState threshold;
  std::vector<int> arm_ids;                  // original ids; empty = 0..N-1
  std::vector<std::vector<double>> states;   // [t][arm]
  std::vector<std::vector<int>> actions;     // [t][arm], 0/1
  std::vector<int> budgets;                  // expected sum of actions at t
  std::vector<std::vector<char>> active;     // [t][arm]; empty = all active

  int horizon() const { return static_cast<int>(states.size()); }
};

// Post-hoc budget validator: the actions of active arms must sum to the
// recorded budget at every timestep. Throws with the offending timestep.
void validate_budget(const EpisodeLog& log);

// Rebuilds trajectories (without features) from a log; used for byte-exact
// replay comparisons and CSV export.
std::vector<Trajectory> trajectories_from_log(const EpisodeLog& log);

// Episode CSV: `arm_id,week,state,action,policy,seed`, sorted by (arm, week).
void write_episode_csv(const std::string& path, const EpisodeLog& log);
EpisodeLog read_episode_csv(const std::string& path);

// What a policy sees at one decision step: every committed (state, action)
// pair so far, the current states, static features, and which arms remain.
struct DecisionContext {
  int t = 0;
  int budget = 0;
  EngagementState threshold;
  std::span<const std::vector<Step>> histories;   // committed steps, per arm
  std::span<const EngagementState> current;       // state at decision time
  std::span<const std::vector<double>> features;
  std::span<const char> pool;                     // 1 = selectable
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  // Must return exactly ctx.budget distinct arms from the pool when
  // uses_budget() is true; control and historical replay return their own
  // action sets instead.
  virtual PolicyDecision decide(const DecisionContext& ctx, Rng& rng) = 0;
  virtual bool uses_budget() const { return true; }
  virtual void reset() {}
};

class ControlPolicy : public Policy {
 public:
  std::string name() const override { return "control"; }
  PolicyDecision decide(const DecisionContext&, Rng&) override { return control_select(); }
  bool uses_budget() const override { return false; }
};

class RandomPolicy : public Policy {
 public:
  std::string name() const override { return "random"; }
  PolicyDecision decide(const DecisionContext& ctx, Rng& rng) override;
};

class RoundRobinPolicy : public Policy {
 public:
  std::string name() const override { return "round_robin"; }
  PolicyDecision decide(const DecisionContext& ctx, Rng& rng) override;
  void reset() override { cursor_ = 0; }

 private:
  int cursor_ = 0;
};

// Replays the recorded action sequence of a dataset; the zero-deviation
// reference for counterfactual replay.
class HistoricalPolicy : public Policy {
 public:
  explicit HistoricalPolicy(const std::vector<Trajectory>* dataset) : dataset_(dataset) {}
  std::string name() const override { return "historical"; }
  PolicyDecision decide(const DecisionContext& ctx, Rng& rng) override;
  bool uses_budget() const override { return false; }

 private:
  const std::vector<Trajectory>* dataset_;
};

// Scores every arm in the pool with the forecast index and picks the top k.
// Scoring runs in a parallel map; tie-breaking stays serial and seeded.
class TariPolicy : public Policy {
 public:
  TariPolicy(const ForecastModel* model, int horizon)
      : shared_model_(model), horizon_(horizon) {}
  std::string name() const override { return "tari"; }
  PolicyDecision decide(const DecisionContext& ctx, Rng& rng) override;

 protected:
  virtual const ForecastModel& model_for_arm(int arm) const { return *shared_model_; }
  // Hook for the oracle variant to pin ground truth before scoring an arm.
  virtual void before_scoring(const DecisionContext&) {}
  virtual void before_arm(int, std::span<const Step>, EngagementState) const {}

 private:
  const ForecastModel* shared_model_;
  int horizon_;
};

// Forecast-index policy backed by per-arm ground-truth oracles. Keeps shadow
// agent states in sync by replaying committed actions (deterministic agent
// kinds only need this for the habit timer) and re-anchors each oracle at
// the true state before scoring.
class OracleTariPolicy : public TariPolicy {
 public:
  OracleTariPolicy(std::vector<AgentSpec> specs, int h, int horizon);
  std::string name() const override { return "tari_oracle"; }
  void reset() override;

 protected:
  const ForecastModel& model_for_arm(int arm) const override;
  void before_scoring(const DecisionContext& ctx) override;
  void before_arm(int arm, std::span<const Step> history, EngagementState s) const override;

 private:
  std::vector<AgentSpec> specs_;
  std::vector<std::unique_ptr<OracleModel>> oracles_;
  std::vector<AgentState> shadow_;
  std::size_t synced_steps_ = 0;
};

class WhittlePolicy : public Policy {
 public:
  WhittlePolicy(WhittleModel model, WhittleIndexCache cache)
      : model_(std::move(model)), cache_(std::move(cache)) {}
  std::string name() const override { return "whittle"; }
  PolicyDecision decide(const DecisionContext& ctx, Rng& rng) override;
  const WhittleModel& model() const { return model_; }

 private:
  WhittleModel model_;
  WhittleIndexCache cache_;
};

// Builds the h-step window that precedes the current state, front-padding
// with the earliest observation (or the current state when none exist).
std::vector<Step> padded_history(std::span<const Step> committed, EngagementState current, int h);

// Fully observable synthetic episode: the policy sees true states, selected
// arms receive the active action, and all agents advance one step.
// Deterministic for a fixed seed regardless of worker count.
EpisodeLog run_synthetic_episode(const ProblemInstance& instance,
                                 const std::vector<AgentSpec>& agents, Policy& policy,
                                 std::uint64_t seed);

enum class ReplayMethod { full_counterfactual, remove_on_deviation };

struct ReplayConfig {
  ReplayMethod method = ReplayMethod::full_counterfactual;
  // Trained on the entire dataset; only consulted when an arm deviates.
  const ForecastModel* counterfactual_model = nullptr;
  // Weeks replayed verbatim (historical actions) before the policy takes
  // over; 0 = use the counterfactual model's window length.
  int observation_weeks = 0;
  EngagementState threshold;
};

struct ReplayStats {
  std::size_t counterfactual_calls = 0;
  std::vector<int> deviation_week;  // 0-based week of first deviation, -1 = never
  int final_pool_size = 0;
};

// Offline counterfactual replay. Non-deviated arms replay recorded states
// verbatim. Method full_counterfactual switches a deviated arm to recursive
// model predictions for the rest of the episode; method remove_on_deviation
// predicts a single next state (counted once in the metrics) and then drops
// the arm from the pool, recomputing the budget as fraction x remaining.
EpisodeLog replay_offline(const std::vector<Trajectory>& dataset, Policy& policy,
                          const ReplayConfig& cfg, double budget_fraction, std::uint64_t seed,
                          ReplayStats* stats = nullptr);

// --- metrics ---------------------------------------------------------------

// Fraction of arms in engaging state per timestep, over active arms minus
// the excluded ones (exclude is empty or one flag per arm).
std::vector<double> engaged_fraction(const EpisodeLog& log, EngagementState threshold,
                                     const std::vector<char>& exclude = {});

// Cumulative net difference in engaged-arm counts, policy minus control.
// Per-step values can be negative (policy worse); *had_negative_steps
// reports whether any were.
std::vector<double> drops_prevented(const EpisodeLog& log_policy, const EpisodeLog& log_control,
                                    EngagementState threshold,
                                    bool* had_negative_steps = nullptr);

// Arms that engaged at least once in the first 6 weeks, never received a
// historical call, and spent the final 6 observed weeks non-engaging.
std::vector<int> critical_beneficiaries(const std::vector<Trajectory>& dataset,
                                        EngagementState threshold);

// Cumulative percentage of the critical set acted on at least once by t.
std::vector<double> critical_reached(const EpisodeLog& log, const std::vector<int>& critical);

struct ImprovementMetrics {
  double mean_weekly_engagement_improvement = 0.0;       // counts
  double mean_relative_engagement_improvement_pct = 0.0; // percent
  double cumulative_additional_engagement = 0.0;         // counts
  double cumulative_additional_duration_seconds = 0.0;   // 120 s = one full message
  double relative_cumulative_engagement_pct = 0.0;       // percent
  bool relative_defined = true;  // false when the baseline never engages
};

ImprovementMetrics improvement_metrics(const EpisodeLog& log_policy, const EpisodeLog& log_baseline,
                                       EngagementState threshold);

struct MetricReport {
  std::vector<double> engaged_fraction;
  std::vector<double> cumulative_drops_prevented_vs_control;
  std::vector<double> critical_reached_pct;  // empty outside replay mode
  ImprovementMetrics improvement;
  // Named summary scalars; the aggregate table averages exactly these.
  std::vector<std::pair<std::string, double>> scalars;
};

void write_metric_report_json(const std::string& path, const MetricReport& report);

}  // namespace restless

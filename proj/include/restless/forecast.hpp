// Time-series forecasting: sliding-window dataset construction, a pluggable
// next-state model interface, a closed-form ridge autoregressive baseline,
// a ground-truth oracle for tests, and iterated multi-step rollouts.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "restless/core.hpp"
#include "restless/rng.hpp"
#include "restless/synthgen.hpp"

namespace restless {

// One supervised example: the h most recent (state, action) pairs plus
// optional static covariates, labeled with the next state.
struct WindowSample {
  int arm_id = 0;
  std::vector<Step> history;  // exactly h steps, oldest first
  std::vector<double> aux;
  EngagementState target;
};

// Next-state predictor. predict_next consumes the pair (s, a) as the most
// recent input position together with the last h-1 entries of `history`
// (the oldest entry is the one about to fall out of the window), so the
// model always sees exactly h (state, action) pairs.
class ForecastModel {
 public:
  virtual ~ForecastModel() = default;
  virtual int window_length() const = 0;
  virtual int aux_dim() const = 0;
  virtual EngagementState predict_next(std::span<const Step> history,
                                       std::span<const double> aux, EngagementState s,
                                       Action a) const = 0;
};

// Ridge-regularized linear autoregression on min-max-scaled inputs
// [states(h), actions(h), aux, 1]; the scaler comes from training data only
// and predictions are clamped to [0,1].
class LinearARModel : public ForecastModel {
 public:
  int window_length() const override { return h_; }
  int aux_dim() const override { return aux_dim_; }
  EngagementState predict_next(std::span<const Step> history, std::span<const double> aux,
                               EngagementState s, Action a) const override;

  double ridge() const { return ridge_; }
  double train_mae() const { return train_mae_; }
  const std::vector<double>& weights() const { return weights_; }

  void save(const std::string& path) const;
  static LinearARModel load(const std::string& path);

 private:
  friend LinearARModel fit_linear_ar(const std::vector<WindowSample>&, double);

  std::vector<double> input_row(std::span<const Step> pairs, std::span<const double> aux) const;

  int h_ = 0;
  int aux_dim_ = 0;
  double ridge_ = 0.0;
  double train_mae_ = 0.0;
  std::vector<double> weights_;     // length 2h + aux_dim + 1 (bias last)
  std::vector<double> scale_min_;   // per non-bias input
  std::vector<double> scale_span_;  // 1.0 where the training column is constant
};

// Exact dynamics of one synthetic agent. For habit-forming agents the habit
// timer is not recoverable from a length-h window alone, so the oracle keeps
// an anchored rollout cursor: re_anchor() pins the true simulator state, a
// query matching the anchor restarts from it (e.g. the second branch of an
// index computation), a query continuing the previous prediction advances
// the cursor, and anything else falls back to reconstructing the timer from
// the trailing run of 1.0 states. Not safe for concurrent use; give each
// worker its own instance.
class OracleModel : public ForecastModel {
 public:
  OracleModel(AgentSpec spec, int h);

  int window_length() const override { return h_; }
  int aux_dim() const override { return 0; }
  EngagementState predict_next(std::span<const Step> history, std::span<const double> aux,
                               EngagementState s, Action a) const override;

  // Pins the ground-truth agent state for queries made at (history, s).
  void re_anchor(std::span<const Step> history, const AgentState& truth) const;

 private:
  AgentState reconstruct(std::span<const Step> history, EngagementState s) const;

  AgentSpec spec_;
  int h_;
  mutable bool have_anchor_ = false;
  mutable std::vector<Step> anchor_history_;
  mutable AgentState anchor_state_;
  mutable std::vector<Step> cursor_history_;
  mutable AgentState cursor_state_;
};

// Emits one sample per window position; trajectories shorter than h+1 steps
// are skipped and counted in *n_skipped when provided.
std::vector<WindowSample> build_windows(const std::vector<Trajectory>& trajectories, int h,
                                        std::size_t* n_skipped = nullptr);

struct DatasetSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> val;
  std::vector<WindowSample> test;
};

// Splits by arm (every window of an arm lands in one partition) to prevent
// temporal leakage between partitions.
DatasetSplit split_dataset(const std::vector<WindowSample>& samples, Rng& rng,
                           double train_ratio = 0.64, double val_ratio = 0.16,
                           double test_ratio = 0.20);

LinearARModel fit_linear_ar(const std::vector<WindowSample>& train, double ridge);

// Iterated multi-step rollout: applies the model recursively, feeding each
// prediction back as the next input state. Returns one state per plan entry.
std::vector<EngagementState> rollout_ims(const ForecastModel& model,
                                         std::span<const Step> history,
                                         std::span<const double> aux, EngagementState s0,
                                         const std::vector<Action>& plan);

// Mean absolute error of steps_ahead-step recursive forecasts against the
// realized states, over every valid anchor of every trajectory. Recorded
// actions are used as the rollout plan.
double walk_forward_mae(const ForecastModel& model, const std::vector<Trajectory>& trajectories,
                        int h, int steps_ahead);

}  // namespace restless

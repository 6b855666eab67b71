#include "restless/forecast.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "restless/csv.hpp"

namespace restless {
namespace {

void check_window_args(int h, std::span<const Step> history, int aux_dim,
                       std::span<const double> aux) {
  if (static_cast<int>(history.size()) != h) {
    throw std::invalid_argument("history length " + std::to_string(history.size()) +
                                " does not match model window " + std::to_string(h));
  }
  if (static_cast<int>(aux.size()) != aux_dim) {
    throw std::invalid_argument("aux length " + std::to_string(aux.size()) +
                                " does not match model aux_dim " + std::to_string(aux_dim));
  }
}

}  // namespace

std::vector<WindowSample> build_windows(const std::vector<Trajectory>& trajectories, int h,
                                        std::size_t* n_skipped) {
  if (h < 1) throw std::invalid_argument("window length h must be >= 1");
  std::vector<WindowSample> samples;
  std::size_t skipped = 0;
  for (const auto& traj : trajectories) {
    const auto L = traj.steps.size();
    if (L < static_cast<std::size_t>(h) + 1) {
      ++skipped;
      continue;
    }
    for (std::size_t p = static_cast<std::size_t>(h); p < L; ++p) {
      WindowSample sample;
      sample.arm_id = traj.arm_id;
      sample.history.assign(traj.steps.begin() + static_cast<std::ptrdiff_t>(p) - h,
                            traj.steps.begin() + static_cast<std::ptrdiff_t>(p));
      sample.aux = traj.features;
      sample.target = traj.steps[p].state;
      samples.push_back(std::move(sample));
    }
  }
  if (n_skipped != nullptr) *n_skipped = skipped;
  return samples;
}

DatasetSplit split_dataset(const std::vector<WindowSample>& samples, Rng& rng, double train_ratio,
                           double val_ratio, double test_ratio) {
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must sum to 1");
  }
  std::set<int> arm_set;
  for (const auto& s : samples) arm_set.insert(s.arm_id);
  const int n = static_cast<int>(arm_set.size());
  if (n < 3) throw std::invalid_argument("split needs at least 3 distinct arms");

  std::vector<int> arms(arm_set.begin(), arm_set.end());
  rng.shuffle(arms);
  // Floor with a minimum of one arm per partition; the remainder goes to test.
  const int n_train = std::max(1, static_cast<int>(std::floor(train_ratio * n)));
  const int n_val = std::max(1, static_cast<int>(std::floor(val_ratio * n)));
  if (n - n_train - n_val < 1) throw std::invalid_argument("split leaves no test arms");

  std::set<int> train_arms(arms.begin(), arms.begin() + n_train);
  std::set<int> val_arms(arms.begin() + n_train, arms.begin() + n_train + n_val);
  DatasetSplit split;
  for (const auto& s : samples) {
    if (train_arms.count(s.arm_id)) {
      split.train.push_back(s);
    } else if (val_arms.count(s.arm_id)) {
      split.val.push_back(s);
    } else {
      split.test.push_back(s);
    }
  }
  return split;
}

std::vector<double> LinearARModel::input_row(std::span<const Step> pairs,
                                             std::span<const double> aux) const {
  std::vector<double> row;
  row.reserve(weights_.size());
  for (const auto& step : pairs) row.push_back(step.state.value());
  for (const auto& step : pairs) row.push_back(static_cast<double>(action_index(step.action)));
  for (double f : aux) row.push_back(f);
  for (std::size_t j = 0; j < row.size(); ++j) {
    row[j] = (row[j] - scale_min_[j]) / scale_span_[j];
  }
  row.push_back(1.0);  // bias
  return row;
}

EngagementState LinearARModel::predict_next(std::span<const Step> history,
                                            std::span<const double> aux, EngagementState s,
                                            Action a) const {
  check_window_args(h_, history, aux_dim_, aux);
  // The h consumed pairs: the newest h-1 history entries plus (s, a).
  std::vector<Step> pairs(history.begin() + 1, history.end());
  pairs.push_back(Step{s, a});
  const auto row = input_row(pairs, aux);
  double out = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) out += weights_[j] * row[j];
  return EngagementState::clamped(out);
}

LinearARModel fit_linear_ar(const std::vector<WindowSample>& train, double ridge) {
  if (train.empty()) throw std::invalid_argument("fit_linear_ar: empty training set");
  if (ridge < 0.0) throw std::invalid_argument("fit_linear_ar: ridge must be >= 0");
  const int h = static_cast<int>(train.front().history.size());
  const int aux_dim = static_cast<int>(train.front().aux.size());
  for (const auto& s : train) {
    if (static_cast<int>(s.history.size()) != h || static_cast<int>(s.aux.size()) != aux_dim) {
      throw std::invalid_argument("fit_linear_ar: inconsistent window or aux sizes");
    }
  }

  LinearARModel model;
  model.h_ = h;
  model.aux_dim_ = aux_dim;
  model.ridge_ = ridge;
  const int n_inputs = 2 * h + aux_dim;  // without bias
  const int dim = n_inputs + 1;

  // Min-max scaler from the training data only.
  model.scale_min_.assign(static_cast<std::size_t>(n_inputs), 0.0);
  model.scale_span_.assign(static_cast<std::size_t>(n_inputs), 1.0);
  std::vector<double> col_max(static_cast<std::size_t>(n_inputs), 0.0);
  auto raw_row = [&](const WindowSample& s) {
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(n_inputs));
    for (const auto& step : s.history) row.push_back(step.state.value());
    for (const auto& step : s.history) row.push_back(static_cast<double>(action_index(step.action)));
    for (double f : s.aux) row.push_back(f);
    return row;
  };
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto row = raw_row(train[i]);
    for (int j = 0; j < n_inputs; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (i == 0 || row[ju] < model.scale_min_[ju]) model.scale_min_[ju] = row[ju];
      if (i == 0 || row[ju] > col_max[ju]) col_max[ju] = row[ju];
    }
  }
  for (int j = 0; j < n_inputs; ++j) {
    const auto ju = static_cast<std::size_t>(j);
    const double span = col_max[ju] - model.scale_min_[ju];
    model.scale_span_[ju] = span > 0.0 ? span : 1.0;  // constant columns scale to 0
  }

  Eigen::MatrixXd X(static_cast<Eigen::Index>(train.size()), dim);
  Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto row = raw_row(train[i]);
    for (int j = 0; j < n_inputs; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      X(static_cast<Eigen::Index>(i), j) = (row[ju] - model.scale_min_[ju]) / model.scale_span_[ju];
    }
    X(static_cast<Eigen::Index>(i), dim - 1) = 1.0;
    y(static_cast<Eigen::Index>(i)) = train[i].target.value();
  }

  Eigen::MatrixXd gram = X.transpose() * X;
  for (int j = 0; j < n_inputs; ++j) gram(j, j) += ridge;  // bias stays unregularized
  const Eigen::VectorXd rhs = X.transpose() * y;

  Eigen::VectorXd w;
  if (ridge == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (!lu.isInvertible()) {
      throw std::invalid_argument(
          "fit_linear_ar: singular normal equations; rerun with ridge > 0");
    }
    w = lu.solve(rhs);
  } else {
    w = gram.ldlt().solve(rhs);
  }
  model.weights_.assign(w.data(), w.data() + dim);

  double abs_err = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const double pred =
        std::clamp((X.row(static_cast<Eigen::Index>(i)) * w).value(), 0.0, 1.0);
    abs_err += std::abs(pred - train[i].target.value());
  }
  model.train_mae_ = abs_err / static_cast<double>(train.size());
  return model;
}

void LinearARModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "linear-ar-v1\n";
  out << "h " << h_ << '\n';
  out << "aux_dim " << aux_dim_ << '\n';
  out << "ridge " << format_double(ridge_) << '\n';
  auto write_vec = [&](const char* label, const std::vector<double>& v) {
    out << label;
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
  };
  write_vec("scale_min", scale_min_);
  write_vec("scale_span", scale_span_);
  write_vec("weights", weights_);
  out << "train_mae " << format_double(train_mae_) << '\n';
}

LinearARModel LinearARModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string magic;
  if (!std::getline(in, magic) || magic != "linear-ar-v1") {
    throw std::runtime_error(path + ": not a linear-ar-v1 model file");
  }
  LinearARModel model;
  std::string label;
  auto expect = [&](const char* want) {
    if (!(in >> label) || label != want) {
      throw std::runtime_error(path + ": expected field '" + want + "'");
    }
  };
  expect("h");
  in >> model.h_;
  expect("aux_dim");
  in >> model.aux_dim_;
  expect("ridge");
  in >> model.ridge_;
  const int n_inputs = 2 * model.h_ + model.aux_dim_;
  auto read_vec = [&](const char* want, std::vector<double>& v, int count) {
    expect(want);
    v.resize(static_cast<std::size_t>(count));
    for (auto& x : v) {
      if (!(in >> x)) throw std::runtime_error(path + ": truncated field '" + want + "'");
    }
  };
  read_vec("scale_min", model.scale_min_, n_inputs);
  read_vec("scale_span", model.scale_span_, n_inputs);
  read_vec("weights", model.weights_, n_inputs + 1);
  expect("train_mae");
  in >> model.train_mae_;
  if (!in) throw std::runtime_error(path + ": truncated model file");
  return model;
}

OracleModel::OracleModel(AgentSpec spec, int h) : spec_(std::move(spec)), h_(h) {
  if (h_ < 1) throw std::invalid_argument("oracle window length must be >= 1");
}

void OracleModel::re_anchor(std::span<const Step> history, const AgentState& truth) const {
  anchor_history_.assign(history.begin(), history.end());
  anchor_state_ = truth;
  cursor_history_ = anchor_history_;
  cursor_state_ = truth;
  have_anchor_ = true;
}

AgentState OracleModel::reconstruct(std::span<const Step> history, EngagementState s) const {
  if (spec_.kind != AgentKind::habit_former || s.value() < 1.0) return AgentState{s, 0};
  // Trailing run of 1.0 states bounds how long the habit has been active.
  int run = 1;
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->state.value() < 1.0) break;
    ++run;
  }
  return AgentState{s, std::max(0, spec_.habit_duration - (run - 1))};
}

EngagementState OracleModel::predict_next(std::span<const Step> history,
                                          std::span<const double> /*aux ignored*/,
                                          EngagementState s, Action a) const {
  if (static_cast<int>(history.size()) != h_) {
    throw std::invalid_argument("history length " + std::to_string(history.size()) +
                                " does not match oracle window " + std::to_string(h_));
  }
  if (spec_.kind == AgentKind::motivation_based) {
    if (a == Action::active) return EngagementState(spec_.baseline);
    return EngagementState::clamped(s.value() - spec_.drop_rate);
  }
  if (spec_.kind == AgentKind::random_agent) {
    // No information about the next draw; the current state is the
    // distribution-free stand-in.
    return s;
  }

  auto matches = [&](const std::vector<Step>& hist, const AgentState& st) {
    return st.current == s && std::equal(history.begin(), history.end(), hist.begin(), hist.end());
  };
  // Continuation takes precedence over the anchor: a long saturated rollout
  // can slide back into a window identical to the anchor's, and restarting
  // there would wrongly reset the hidden habit clock mid-branch. A genuine
  // branch restart never matches the cursor, because the preceding branch's
  // final prediction moved the cursor state away from the anchor state.
  AgentState st;
  if (have_anchor_ && matches(cursor_history_, cursor_state_)) {
    st = cursor_state_;  // continuation of the previous prediction
  } else if (have_anchor_ && matches(anchor_history_, anchor_state_)) {
    st = anchor_state_;  // restarted branch from the pinned true state
  } else {
    st = reconstruct(history, s);
  }

  Rng unused(0);  // habit formers never consume randomness
  const AgentState next = step_agent(spec_, st, a, unused);
  cursor_history_.assign(history.begin() + 1, history.end());
  cursor_history_.push_back(Step{s, a});
  cursor_state_ = next;
  if (!have_anchor_) have_anchor_ = true;  // enables continuation tracking
  return next.current;
}

std::vector<EngagementState> rollout_ims(const ForecastModel& model,
                                         std::span<const Step> history,
                                         std::span<const double> aux, EngagementState s0,
                                         const std::vector<Action>& plan) {
  if (plan.empty()) throw std::invalid_argument("rollout_ims: empty action plan");
  std::vector<Step> rolling(history.begin(), history.end());
  std::vector<EngagementState> out;
  out.reserve(plan.size());
  EngagementState s = s0;
  for (Action a : plan) {
    const EngagementState next = model.predict_next(rolling, aux, s, a);
    rolling.erase(rolling.begin());
    rolling.push_back(Step{s, a});
    out.push_back(next);
    s = next;
  }
  return out;
}

double walk_forward_mae(const ForecastModel& model, const std::vector<Trajectory>& trajectories,
                        int h, int steps_ahead) {
  if (steps_ahead < 1) throw std::invalid_argument("steps_ahead must be >= 1");
  double abs_err = 0.0;
  std::size_t n_anchors = 0;
  for (const auto& traj : trajectories) {
    const auto L = static_cast<std::ptrdiff_t>(traj.steps.size());
    for (std::ptrdiff_t p0 = h; p0 + steps_ahead - 1 < L; ++p0) {
      // Window ending right before the pair (s, a) = steps[p0-1].
      std::vector<Step> history;
      history.reserve(static_cast<std::size_t>(h));
      for (std::ptrdiff_t q = p0 - 1 - h; q < p0 - 1; ++q) {
        history.push_back(traj.steps[static_cast<std::size_t>(std::max<std::ptrdiff_t>(q, 0))]);
      }
      std::vector<Action> plan;
      plan.reserve(static_cast<std::size_t>(steps_ahead));
      for (int k = 0; k < steps_ahead; ++k) {
        plan.push_back(traj.steps[static_cast<std::size_t>(p0 - 1 + k)].action);
      }
      const auto preds = rollout_ims(model, history, traj.features,
                                     traj.steps[static_cast<std::size_t>(p0 - 1)].state, plan);
      const double truth =
          traj.steps[static_cast<std::size_t>(p0 + steps_ahead - 1)].state.value();
      abs_err += std::abs(preds.back().value() - truth);
      ++n_anchors;
    }
  }
  if (n_anchors == 0) {
    throw std::runtime_error("walk_forward_mae: no trajectory offers a valid anchor");
  }
  return abs_err / static_cast<double>(n_anchors);
}

}  // namespace restless

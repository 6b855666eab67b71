#include "restless/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "restless/csv.hpp"
#include "restless/parallel.hpp"

namespace restless {
namespace {

// Stream labels; kept disjoint from the synthgen per-arm labels (< 0x1000).
constexpr std::uint64_t kDecisionArmLabel = 0xffffffffULL;
constexpr std::uint64_t kStepStreamBase = 0x10000ULL;

// Top-k restricted to pool members; scores of excluded arms never compete.
PolicyDecision select_top_k_masked(const std::vector<double>& scores,
                                   std::span<const char> pool, int k, Rng& rng) {
  std::vector<int> members;
  std::vector<double> member_scores;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (pool[i]) {
      members.push_back(static_cast<int>(i));
      member_scores.push_back(scores[i]);
    }
  }
  if (k > static_cast<int>(members.size())) {
    throw std::invalid_argument("budget exceeds the number of selectable arms");
  }
  auto within = select_top_k(member_scores, k, rng);
  PolicyDecision decision;
  decision.arm_ids.reserve(within.arm_ids.size());
  for (int idx : within.arm_ids) decision.arm_ids.push_back(members[static_cast<std::size_t>(idx)]);
  std::sort(decision.arm_ids.begin(), decision.arm_ids.end());
  return decision;
}

int pool_count(std::span<const char> pool) {
  int n = 0;
  for (char c : pool) n += c ? 1 : 0;
  return n;
}

void check_decision(const PolicyDecision& decision, const DecisionContext& ctx,
                    bool must_match_budget, const std::string& policy_name) {
  std::vector<char> seen(ctx.histories.size(), 0);
  for (int id : decision.arm_ids) {
    if (id < 0 || id >= static_cast<int>(ctx.histories.size())) {
      throw std::runtime_error("policy '" + policy_name + "' selected invalid arm " +
                               std::to_string(id));
    }
    if (seen[static_cast<std::size_t>(id)]++) {
      throw std::runtime_error("policy '" + policy_name + "' selected arm " + std::to_string(id) +
                               " twice");
    }
    if (!ctx.pool[static_cast<std::size_t>(id)]) {
      throw std::runtime_error("policy '" + policy_name + "' selected removed arm " +
                               std::to_string(id));
    }
  }
  if (must_match_budget && static_cast<int>(decision.arm_ids.size()) != ctx.budget) {
    throw std::runtime_error("policy '" + policy_name + "' returned " +
                             std::to_string(decision.arm_ids.size()) + " arms for budget " +
                             std::to_string(ctx.budget));
  }
}

std::vector<std::size_t> arm_columns(const EpisodeLog& log, const std::vector<int>& ids) {
  std::map<int, std::size_t> col_of;
  for (std::size_t i = 0; i < log.arm_ids.size(); ++i) col_of[log.arm_ids[i]] = i;
  std::vector<std::size_t> cols;
  for (int id : ids) {
    const auto it = col_of.find(id);
    if (it == col_of.end()) {
      throw std::invalid_argument("arm " + std::to_string(id) + " not present in episode log");
    }
    cols.push_back(it->second);
  }
  return cols;
}

bool arm_active(const EpisodeLog& log, std::size_t t, std::size_t i) {
  return log.active.empty() || log.active[t][i] != 0;
}

int engaged_count(const EpisodeLog& log, std::size_t t, double thr) {
  int n = 0;
  for (std::size_t i = 0; i < log.states[t].size(); ++i) {
    if (arm_active(log, t, i) && log.states[t][i] >= thr) ++n;
  }
  return n;
}

void check_matched_logs(const EpisodeLog& a, const EpisodeLog& b, const char* what) {
  if (a.n_arms != b.n_arms || a.horizon() != b.horizon()) {
    throw std::invalid_argument(std::string(what) + ": logs differ in arms or horizon");
  }
}

}  // namespace

void validate_budget(const EpisodeLog& log) {
  if (log.budgets.size() != log.actions.size()) {
    throw std::runtime_error("episode log: budgets and actions lengths differ");
  }
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    int total = 0;
    for (std::size_t i = 0; i < log.actions[t].size(); ++i) {
      if (log.actions[t][i] != 0 && !arm_active(log, t, i)) {
        throw std::runtime_error("episode log: removed arm " + std::to_string(i) +
                                 " acted at t=" + std::to_string(t));
      }
      total += log.actions[t][i];
    }
    if (total != log.budgets[t]) {
      throw std::runtime_error("episode log: budget violated at t=" + std::to_string(t) +
                               " (expected " + std::to_string(log.budgets[t]) + ", got " +
                               std::to_string(total) + ")");
    }
  }
}

std::vector<Trajectory> trajectories_from_log(const EpisodeLog& log) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(log.n_arms));
  for (int i = 0; i < log.n_arms; ++i) {
    Trajectory traj;
    traj.arm_id = log.arm_ids.empty() ? i : log.arm_ids[static_cast<std::size_t>(i)];
    for (int t = 0; t < log.horizon(); ++t) {
      traj.steps.push_back(
          Step{EngagementState(log.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)]),
               log.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] != 0
                   ? Action::active
                   : Action::passive});
    }
    out.push_back(std::move(traj));
  }
  return out;
}

void write_episode_csv(const std::string& path, const EpisodeLog& log) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "arm_id,week,state,action,policy,seed\n";
  for (int i = 0; i < log.n_arms; ++i) {
    const int arm_id = log.arm_ids.empty() ? i : log.arm_ids[static_cast<std::size_t>(i)];
    for (int t = 0; t < log.horizon(); ++t) {
      out << arm_id << ',' << (t + 1) << ','
          << format_double(log.states[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)])
          << ',' << log.actions[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] << ','
          << log.policy << ',' << log.seed << '\n';
    }
  }
}

EpisodeLog read_episode_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) !=
          std::vector<std::string>{"arm_id", "week", "state", "action", "policy", "seed"}) {
    throw std::runtime_error(path + ": expected episode header");
  }
  struct Row {
    int arm;
    int week;
    double state;
    int action;
  };
  std::vector<Row> rows;
  EpisodeLog log;
  bool first = true;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw std::runtime_error(path + ": bad field count at line " +
                                                std::to_string(line_no));
    rows.push_back(Row{std::stoi(f[0]), std::stoi(f[1]), std::stod(f[2]), std::stoi(f[3])});
    if (first) {
      log.policy = f[4];
      log.seed = std::stoull(f[5]);
      first = false;
    } else if (log.policy != f[4]) {
      throw std::runtime_error(path + ": mixed policies in one episode file");
    }
  }
  if (rows.empty()) throw std::runtime_error(path + ": no rows");
  std::map<int, std::vector<Row>> by_arm;
  for (const auto& r : rows) by_arm[r.arm].push_back(r);
  const auto horizon = by_arm.begin()->second.size();
  log.n_arms = static_cast<int>(by_arm.size());
  log.states.assign(horizon, std::vector<double>(static_cast<std::size_t>(log.n_arms), 0.0));
  log.actions.assign(horizon, std::vector<int>(static_cast<std::size_t>(log.n_arms), 0));
  std::size_t col = 0;
  for (const auto& [arm, arm_rows] : by_arm) {
    if (arm_rows.size() != horizon) {
      throw std::runtime_error(path + ": arm " + std::to_string(arm) + " has a different horizon");
    }
    log.arm_ids.push_back(arm);
    for (std::size_t t = 0; t < horizon; ++t) {
      if (arm_rows[t].week != static_cast<int>(t) + 1) {
        throw std::runtime_error(path + ": weeks of arm " + std::to_string(arm) +
                                 " are not consecutive from 1");
      }
      log.states[t][col] = arm_rows[t].state;
      log.actions[t][col] = arm_rows[t].action;
    }
    ++col;
  }
  log.budgets.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    int total = 0;
    for (int a : log.actions[t]) total += a;
    log.budgets.push_back(total);
  }
  return log;
}

std::vector<Step> padded_history(std::span<const Step> committed, EngagementState current, int h) {
  std::vector<Step> hist;
  hist.reserve(static_cast<std::size_t>(h));
  const auto n = static_cast<std::ptrdiff_t>(committed.size());
  const Step pad = committed.empty() ? Step{current, Action::passive} : committed.front();
  for (std::ptrdiff_t q = n - h; q < n; ++q) {
    hist.push_back(q < 0 ? pad : committed[static_cast<std::size_t>(q)]);
  }
  return hist;
}

PolicyDecision RandomPolicy::decide(const DecisionContext& ctx, Rng& rng) {
  std::vector<int> members;
  for (std::size_t i = 0; i < ctx.pool.size(); ++i) {
    if (ctx.pool[i]) members.push_back(static_cast<int>(i));
  }
  if (ctx.budget > static_cast<int>(members.size())) {
    throw std::invalid_argument("budget exceeds the number of selectable arms");
  }
  const auto picks = rng.sample_without_replacement(static_cast<int>(members.size()), ctx.budget);
  PolicyDecision decision;
  for (int p : picks) decision.arm_ids.push_back(members[static_cast<std::size_t>(p)]);
  std::sort(decision.arm_ids.begin(), decision.arm_ids.end());
  return decision;
}

PolicyDecision RoundRobinPolicy::decide(const DecisionContext& ctx, Rng&) {
  const int n = static_cast<int>(ctx.pool.size());
  if (ctx.budget > pool_count(ctx.pool)) {
    throw std::invalid_argument("budget exceeds the number of selectable arms");
  }
  PolicyDecision decision;
  int pos = cursor_ % n;
  int inspected = 0;
  while (static_cast<int>(decision.arm_ids.size()) < ctx.budget && inspected < n) {
    if (ctx.pool[static_cast<std::size_t>(pos)]) decision.arm_ids.push_back(pos);
    pos = (pos + 1) % n;
    ++inspected;
  }
  cursor_ = pos;
  std::sort(decision.arm_ids.begin(), decision.arm_ids.end());
  return decision;
}

PolicyDecision HistoricalPolicy::decide(const DecisionContext& ctx, Rng&) {
  PolicyDecision decision;
  for (std::size_t i = 0; i < dataset_->size(); ++i) {
    const auto& steps = (*dataset_)[i].steps;
    if (ctx.t < static_cast<int>(steps.size()) &&
        steps[static_cast<std::size_t>(ctx.t)].action == Action::active && ctx.pool[i]) {
      decision.arm_ids.push_back(static_cast<int>(i));
    }
  }
  return decision;
}

PolicyDecision TariPolicy::decide(const DecisionContext& ctx, Rng& rng) {
  before_scoring(ctx);
  const std::size_t n = ctx.histories.size();
  std::vector<double> scores(n, -std::numeric_limits<double>::infinity());
  parallel_for(n, [&](std::size_t i) {
    if (!ctx.pool[i]) return;
    const auto& model = model_for_arm(static_cast<int>(i));
    const auto hist = padded_history(ctx.histories[i], ctx.current[i], model.window_length());
    before_arm(static_cast<int>(i), hist, ctx.current[i]);
    const auto idx =
        tari_index(model, hist, ctx.features[i], ctx.current[i], ctx.threshold, horizon_);
    scores[i] = idx.index;
  });
  return select_top_k_masked(scores, ctx.pool, ctx.budget, rng);
}

OracleTariPolicy::OracleTariPolicy(std::vector<AgentSpec> specs, int h, int horizon)
    : TariPolicy(nullptr, horizon), specs_(std::move(specs)) {
  oracles_.reserve(specs_.size());
  for (const auto& spec : specs_) oracles_.push_back(std::make_unique<OracleModel>(spec, h));
  OracleTariPolicy::reset();
}

void OracleTariPolicy::reset() {
  shadow_.clear();
  shadow_.reserve(specs_.size());
  for (const auto& spec : specs_) shadow_.push_back(initial_state(spec));
  synced_steps_ = 0;
}

const ForecastModel& OracleTariPolicy::model_for_arm(int arm) const {
  return *oracles_[static_cast<std::size_t>(arm)];
}

void OracleTariPolicy::before_scoring(const DecisionContext& ctx) {
  if (ctx.histories.empty()) return;
  // Replay committed actions to keep shadow habit timers current. Random
  // agents are skipped: their draws are not reproducible here and their
  // oracle never consults the shadow state.
  const std::size_t committed = ctx.histories[0].size();
  for (; synced_steps_ < committed; ++synced_steps_) {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      if (specs_[i].kind == AgentKind::random_agent) continue;
      Rng unused(0);
      shadow_[i] =
          step_agent(specs_[i], shadow_[i], ctx.histories[i][synced_steps_].action, unused);
    }
  }
}

void OracleTariPolicy::before_arm(int arm, std::span<const Step> history,
                                  EngagementState s) const {
  const auto i = static_cast<std::size_t>(arm);
  const int timer =
      specs_[i].kind == AgentKind::habit_former ? shadow_[i].habit_timer : 0;
  oracles_[i]->re_anchor(history, AgentState{s, timer});
}

PolicyDecision WhittlePolicy::decide(const DecisionContext& ctx, Rng& rng) {
  const std::size_t n = ctx.histories.size();
  std::vector<double> scores(n, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    if (!ctx.pool[i]) continue;
    // The expanded state covers the newest hw observations including the
    // current state (its action slot is irrelevant).
    std::vector<Step> observed(ctx.histories[i].begin(), ctx.histories[i].end());
    observed.push_back(Step{ctx.current[i], Action::passive});
    const int es = model_.expanded_state_of(observed);
    const int cluster = model_.cluster_of(ctx.features[i]);
    scores[i] = cache_.at(model_, cluster, es);
  }
  return select_top_k_masked(scores, ctx.pool, ctx.budget, rng);
}

EpisodeLog run_synthetic_episode(const ProblemInstance& instance,
                                 const std::vector<AgentSpec>& agents, Policy& policy,
                                 std::uint64_t seed) {
  if (static_cast<int>(agents.size()) != instance.n_arms) {
    throw std::invalid_argument("agent count does not match instance.n_arms");
  }
  const auto n = agents.size();
  policy.reset();

  std::vector<AgentState> agent_states;
  agent_states.reserve(n);
  std::vector<std::vector<double>> features(n);
  for (std::size_t i = 0; i < n; ++i) {
    agent_states.push_back(initial_state(agents[i]));
    features[i] = {agents[i].feature};
  }
  std::vector<std::vector<Step>> histories(n);
  std::vector<char> pool(n, 1);
  std::vector<EngagementState> current(n);

  EpisodeLog log;
  log.policy = policy.name();
  log.seed = seed;
  log.n_arms = instance.n_arms;
  log.threshold = instance.threshold;
  log.arm_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) log.arm_ids[i] = static_cast<int>(i);

  for (int t = 0; t < instance.horizon; ++t) {
    for (std::size_t i = 0; i < n; ++i) current[i] = agent_states[i].current;

    DecisionContext ctx;
    ctx.t = t;
    ctx.budget = instance.budget;
    ctx.threshold = instance.threshold;
    ctx.histories = histories;
    ctx.current = current;
    ctx.features = features;
    ctx.pool = pool;
    Rng decision_rng(derive_seed(seed, kDecisionArmLabel, static_cast<std::uint64_t>(t)));
    const auto decision = policy.decide(ctx, decision_rng);
    check_decision(decision, ctx, policy.uses_budget(), policy.name());

    std::vector<int> row_actions(n, 0);
    for (int id : decision.arm_ids) row_actions[static_cast<std::size_t>(id)] = 1;
    log.states.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) log.states.back()[i] = current[i].value();
    log.actions.push_back(row_actions);
    log.budgets.push_back(policy.uses_budget() ? instance.budget
                                               : static_cast<int>(decision.arm_ids.size()));

    // Advance all agents; the per-(arm, step) stream keeps results identical
    // for any worker count.
    parallel_for(n, [&](std::size_t i) {
      Rng arm_rng(derive_seed(seed, static_cast<std::uint64_t>(i),
                              kStepStreamBase + static_cast<std::uint64_t>(t)));
      const Action a = row_actions[i] ? Action::active : Action::passive;
      agent_states[i] = step_agent(agents[i], agent_states[i], a, arm_rng);
    });
    for (std::size_t i = 0; i < n; ++i) {
      histories[i].push_back(Step{current[i], row_actions[i] ? Action::active : Action::passive});
    }
  }
  return log;
}

EpisodeLog replay_offline(const std::vector<Trajectory>& dataset, Policy& policy,
                          const ReplayConfig& cfg, double budget_fraction, std::uint64_t seed,
                          ReplayStats* stats) {
  if (dataset.empty()) throw std::invalid_argument("replay_offline: empty dataset");
  const auto n = dataset.size();
  const auto L = dataset.front().steps.size();
  for (const auto& traj : dataset) {
    if (traj.steps.size() != L) {
      throw std::invalid_argument("replay_offline: trajectories must share one length");
    }
  }
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) {
    throw std::invalid_argument("replay_offline: budget fraction must be in (0, 1]");
  }
  int obs = cfg.observation_weeks;
  if (obs <= 0) obs = cfg.counterfactual_model ? cfg.counterfactual_model->window_length() : 1;
  obs = std::min(obs, static_cast<int>(L));

  enum class Mode { verbatim, counterfactual, removed };
  std::vector<Mode> mode(n, Mode::verbatim);
  std::vector<int> last_metric_week(n, std::numeric_limits<int>::max());
  std::vector<double> cur(n);
  std::vector<std::vector<Step>> histories(n);
  std::vector<char> pool(n, 1);
  std::vector<std::vector<double>> features(n);
  for (std::size_t i = 0; i < n; ++i) {
    cur[i] = dataset[i].steps[0].state.value();
    features[i] = dataset[i].features;
  }

  policy.reset();
  EpisodeLog log;
  log.policy = policy.name();
  log.seed = seed;
  log.n_arms = static_cast<int>(n);
  log.threshold = cfg.threshold;
  for (const auto& traj : dataset) log.arm_ids.push_back(traj.arm_id);

  ReplayStats local_stats;
  local_stats.deviation_week.assign(n, -1);

  std::vector<EngagementState> current(n);
  for (int t = 0; t < static_cast<int>(L); ++t) {
    for (std::size_t i = 0; i < n; ++i) current[i] = EngagementState::clamped(cur[i]);

    PolicyDecision decision;
    int expected_budget;
    if (t < obs) {
      // Observation period: the historical actions replay verbatim.
      for (std::size_t i = 0; i < n; ++i) {
        if (dataset[i].steps[static_cast<std::size_t>(t)].action == Action::active) {
          decision.arm_ids.push_back(static_cast<int>(i));
        }
      }
      expected_budget = static_cast<int>(decision.arm_ids.size());
    } else {
      DecisionContext ctx;
      ctx.t = t;
      ctx.budget = budget_from_fraction(pool_count(pool), budget_fraction);
      ctx.threshold = cfg.threshold;
      ctx.histories = histories;
      ctx.current = current;
      ctx.features = features;
      ctx.pool = pool;
      Rng decision_rng(derive_seed(seed, kDecisionArmLabel, static_cast<std::uint64_t>(t)));
      decision = policy.decide(ctx, decision_rng);
      check_decision(decision, ctx, policy.uses_budget(), policy.name());
      expected_budget =
          policy.uses_budget() ? ctx.budget : static_cast<int>(decision.arm_ids.size());
    }

    std::vector<int> row_actions(n, 0);
    for (int id : decision.arm_ids) row_actions[static_cast<std::size_t>(id)] = 1;
    log.states.emplace_back(cur);
    log.actions.push_back(row_actions);
    log.budgets.push_back(expected_budget);
    log.active.emplace_back(n);
    for (std::size_t i = 0; i < n; ++i) log.active.back()[i] = t <= last_metric_week[i] ? 1 : 0;

    if (t + 1 == static_cast<int>(L)) {
      for (std::size_t i = 0; i < n; ++i) {
        histories[i].push_back(
            Step{current[i], row_actions[i] ? Action::active : Action::passive});
      }
      break;  // final week: nothing left to advance into
    }

    for (std::size_t i = 0; i < n; ++i) {
      const Action a = row_actions[i] ? Action::active : Action::passive;
      double next = cur[i];
      if (mode[i] == Mode::verbatim) {
        const bool deviates =
            t >= obs && a != dataset[i].steps[static_cast<std::size_t>(t)].action;
        if (!deviates) {
          next = dataset[i].steps[static_cast<std::size_t>(t) + 1].state.value();
        } else {
          if (cfg.counterfactual_model == nullptr) {
            throw std::runtime_error("replay deviated but no counterfactual model configured");
          }
          const auto& model = *cfg.counterfactual_model;
          const auto hist = padded_history(histories[i], current[i], model.window_length());
          next = model.predict_next(hist, features[i], current[i], a).value();
          ++local_stats.counterfactual_calls;
          local_stats.deviation_week[i] = t;
          if (cfg.method == ReplayMethod::full_counterfactual) {
            mode[i] = Mode::counterfactual;
          } else {
            // One prediction for the metric delta, then out of the pool; the
            // predicted state is the arm's final metric appearance.
            mode[i] = Mode::removed;
            pool[i] = 0;
            last_metric_week[i] = t + 1;
          }
        }
      } else if (mode[i] == Mode::counterfactual) {
        const auto& model = *cfg.counterfactual_model;
        const auto hist = padded_history(histories[i], current[i], model.window_length());
        next = model.predict_next(hist, features[i], current[i], a).value();
        ++local_stats.counterfactual_calls;
      }
      // Mode::removed: state frozen, already outside the pool.
      histories[i].push_back(Step{current[i], a});
      cur[i] = next;
    }
  }

  local_stats.final_pool_size = pool_count(pool);
  if (stats != nullptr) *stats = local_stats;
  return log;
}

std::vector<double> engaged_fraction(const EpisodeLog& log, EngagementState threshold,
                                     const std::vector<char>& exclude) {
  if (!exclude.empty() && static_cast<int>(exclude.size()) != log.n_arms) {
    throw std::invalid_argument("engaged_fraction: exclusion mask size mismatch");
  }
  std::vector<double> out;
  out.reserve(log.states.size());
  for (std::size_t t = 0; t < log.states.size(); ++t) {
    int numer = 0;
    int denom = 0;
    for (std::size_t i = 0; i < log.states[t].size(); ++i) {
      if (!exclude.empty() && exclude[i]) continue;
      if (!arm_active(log, t, i)) continue;
      ++denom;
      if (log.states[t][i] >= threshold.value()) ++numer;
    }
    out.push_back(denom == 0 ? 0.0 : static_cast<double>(numer) / denom);
  }
  return out;
}

std::vector<double> drops_prevented(const EpisodeLog& log_policy, const EpisodeLog& log_control,
                                    EngagementState threshold, bool* had_negative_steps) {
  check_matched_logs(log_policy, log_control, "drops_prevented");
  std::vector<double> out;
  out.reserve(log_policy.states.size());
  double cumulative = 0.0;
  bool negative = false;
  for (std::size_t t = 0; t < log_policy.states.size(); ++t) {
    const int delta = engaged_count(log_policy, t, threshold.value()) -
                      engaged_count(log_control, t, threshold.value());
    if (delta < 0) negative = true;
    cumulative += delta;
    out.push_back(cumulative);
  }
  if (had_negative_steps != nullptr) *had_negative_steps = negative;
  return out;
}

std::vector<int> critical_beneficiaries(const std::vector<Trajectory>& dataset,
                                        EngagementState threshold) {
  std::vector<int> critical;
  for (const auto& traj : dataset) {
    const auto L = traj.steps.size();
    if (L < 12) {
      throw std::invalid_argument("critical_beneficiaries: needs at least 12 observed weeks");
    }
    bool engaged_early = false;
    for (std::size_t t = 0; t < 6; ++t) {
      if (reward(traj.steps[t].state, threshold) == 1) engaged_early = true;
    }
    bool ever_called = false;
    for (const auto& step : traj.steps) {
      if (step.action == Action::active) ever_called = true;
    }
    bool final_disengaged = true;
    for (std::size_t t = L - 6; t < L; ++t) {
      if (reward(traj.steps[t].state, threshold) == 1) final_disengaged = false;
    }
    if (engaged_early && !ever_called && final_disengaged) critical.push_back(traj.arm_id);
  }
  return critical;
}

std::vector<double> critical_reached(const EpisodeLog& log, const std::vector<int>& critical) {
  const auto cols = arm_columns(log, critical);
  std::vector<double> out;
  out.reserve(log.states.size());
  std::vector<char> reached(cols.size(), 0);
  int n_reached = 0;
  for (std::size_t t = 0; t < log.actions.size(); ++t) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (!reached[c] && log.actions[t][cols[c]] != 0) {
        reached[c] = 1;
        ++n_reached;
      }
    }
    out.push_back(cols.empty() ? 0.0 : 100.0 * n_reached / static_cast<double>(cols.size()));
  }
  return out;
}

ImprovementMetrics improvement_metrics(const EpisodeLog& log_policy, const EpisodeLog& log_baseline,
                                       EngagementState threshold) {
  check_matched_logs(log_policy, log_baseline, "improvement_metrics");
  const auto T = log_policy.states.size();
  if (T == 0) throw std::invalid_argument("improvement_metrics: empty logs");
  ImprovementMetrics m;
  double sum_delta = 0.0;
  double sum_rel = 0.0;
  std::size_t rel_weeks = 0;
  double policy_total = 0.0;
  double baseline_total = 0.0;
  double duration_delta = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const int cnt_p = engaged_count(log_policy, t, threshold.value());
    const int cnt_b = engaged_count(log_baseline, t, threshold.value());
    sum_delta += cnt_p - cnt_b;
    policy_total += cnt_p;
    baseline_total += cnt_b;
    if (cnt_b > 0) {
      sum_rel += 100.0 * (static_cast<double>(cnt_p) / cnt_b - 1.0);
      ++rel_weeks;
    }
    for (std::size_t i = 0; i < log_policy.states[t].size(); ++i) {
      if (arm_active(log_policy, t, i) && arm_active(log_baseline, t, i)) {
        // 120 seconds = listening to one entire weekly message.
        duration_delta += 120.0 * (log_policy.states[t][i] - log_baseline.states[t][i]);
      }
    }
  }
  m.mean_weekly_engagement_improvement = sum_delta / static_cast<double>(T);
  m.mean_relative_engagement_improvement_pct =
      rel_weeks == 0 ? 0.0 : sum_rel / static_cast<double>(rel_weeks);
  m.cumulative_additional_engagement = sum_delta;
  m.cumulative_additional_duration_seconds = duration_delta;
  if (baseline_total > 0.0) {
    m.relative_cumulative_engagement_pct = 100.0 * (policy_total / baseline_total - 1.0);
    m.relative_defined = true;
  } else {
    m.relative_cumulative_engagement_pct = 0.0;
    m.relative_defined = false;
  }
  return m;
}

void write_metric_report_json(const std::string& path, const MetricReport& report) {
  nlohmann::json j;
  j["engaged_fraction"] = report.engaged_fraction;
  j["cumulative_drops_prevented_vs_control"] = report.cumulative_drops_prevented_vs_control;
  j["critical_reached_pct"] = report.critical_reached_pct;
  nlohmann::json aj;
  aj["mean_weekly_engagement_improvement"] = report.improvement.mean_weekly_engagement_improvement;
  aj["mean_relative_engagement_improvement_pct"] =
      report.improvement.mean_relative_engagement_improvement_pct;
  aj["cumulative_additional_engagement"] = report.improvement.cumulative_additional_engagement;
  aj["cumulative_additional_duration_seconds"] =
      report.improvement.cumulative_additional_duration_seconds;
  if (report.improvement.relative_defined) {
    aj["relative_cumulative_engagement_pct"] =
        report.improvement.relative_cumulative_engagement_pct;
  } else {
    aj["relative_cumulative_engagement_pct"] = nullptr;  // baseline never engaged
  }
  j["improvement_vs_baseline"] = aj;
  nlohmann::json scalars = nlohmann::json::object();
  for (const auto& [name, value] : report.scalars) scalars[name] = value;
  j["scalars"] = scalars;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace restless

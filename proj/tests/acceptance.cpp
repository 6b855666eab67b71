// Acceptance suite: each criterion prints one [PASS]/[FAIL] line with its
// measured values; the exit status is the number of failed criteria among
// those selected on the command line (default: all nine).
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "restless/core.hpp"
#include "restless/csv.hpp"
#include "restless/forecast.hpp"
#include "restless/markov.hpp"
#include "restless/policies.hpp"
#include "restless/rng.hpp"
#include "restless/simulate.hpp"
#include "restless/synthgen.hpp"

using namespace restless;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream out;
  out.precision(digits);
  out << std::fixed << v;
  return out.str();
}

double mean_of(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

// ---------------------------------------------------------------------------
// criterion 1: oracle-backed index vs true-dynamics enumeration
// ---------------------------------------------------------------------------

// Counts forecast steps until disengagement exactly like the index does, but
// steps the true simulator instead of a forecast model.
int true_branch_steps(const AgentSpec& spec, AgentState truth, Action first,
                      EngagementState threshold, int H) {
  Rng unused(0);
  AgentState st = truth;
  Action a = first;
  int count = 1;
  AgentState next = step_agent(spec, st, a, unused);
  while (next.current.value() >= threshold.value() && count <= H) {
    st = next;
    a = Action::passive;
    ++count;
    next = step_agent(spec, st, a, unused);
  }
  return count;
}

Outcome criterion1() {
  const EngagementState thr(0.25);
  const int n = 30;
  const int weeks = 20;
  const int H = 20;
  const int window = 6;

  Rng param_rng(101);
  std::vector<AgentSpec> specs;
  std::vector<OracleModel> oracles;
  for (int i = 0; i < n; ++i) {
    const AgentKind kind = i % 2 == 0 ? AgentKind::habit_former : AgentKind::motivation_based;
    specs.push_back(sample_agent(kind, GenMode::test, param_rng));
    oracles.emplace_back(specs.back(), window);
  }

  std::vector<AgentState> truth;
  for (const AgentSpec& spec : specs) truth.push_back(initial_state(spec));
  std::vector<std::vector<Step>> histories(static_cast<std::size_t>(n));

  int compared = 0;
  int mismatches = 0;
  std::string first_mismatch;
  Rng step_rng(0);
  for (int t = 0; t < weeks; ++t) {
    for (int i = 0; i < n; ++i) {
      const auto idx_i = static_cast<std::size_t>(i);
      const EngagementState cur = truth[idx_i].current;
      const auto hist = padded_history(histories[idx_i], cur, window);
      oracles[idx_i].re_anchor(hist, truth[idx_i]);
      const TariIndex idx = tari_index(oracles[idx_i], hist, {}, cur, thr, H);
      const int u_true = true_branch_steps(specs[idx_i], truth[idx_i], Action::active, thr, H);
      const int v_true = true_branch_steps(specs[idx_i], truth[idx_i], Action::passive, thr, H);
      ++compared;
      if (idx.u != u_true || idx.v != v_true) {
        ++mismatches;
        if (first_mismatch.empty()) {
          first_mismatch = " first mismatch arm " + std::to_string(i) + " week " +
                           std::to_string(t + 1) + ": index (u=" + std::to_string(idx.u) +
                           ",v=" + std::to_string(idx.v) + ") vs true (u=" +
                           std::to_string(u_true) + ",v=" + std::to_string(v_true) + ")";
        }
      }
    }
    // Rotating calls so histories mix active and passive weeks.
    std::vector<char> called(static_cast<std::size_t>(n), 0);
    for (int j = 0; j < 3; ++j) called[static_cast<std::size_t>((3 * t + j) % n)] = 1;
    for (int i = 0; i < n; ++i) {
      const auto idx_i = static_cast<std::size_t>(i);
      const Action a = called[idx_i] ? Action::active : Action::passive;
      histories[idx_i].push_back(Step{truth[idx_i].current, a});
      truth[idx_i] = step_agent(specs[idx_i], truth[idx_i], a, step_rng);
    }
  }

  Outcome out;
  out.pass = mismatches == 0;
  out.detail = "oracle index vs true-dynamics enumeration on " + std::to_string(n) +
               " deterministic arms x " + std::to_string(weeks) + " weeks: " +
               std::to_string(mismatches) + "/" + std::to_string(compared) +
               " (u,v) mismatches" + first_mismatch;
  return out;
}

// ---------------------------------------------------------------------------
// criterion 2: policy ordering at desk scale
// ---------------------------------------------------------------------------

Outcome criterion2() {
  const EngagementState thr(0.25);
  const ProblemInstance instance(90, 9, 52, thr);

  const auto historical = generate_historical_dataset(30, 52, GenMode::train, 1234);
  const LinearARModel forecaster = fit_linear_ar(build_windows(historical, 7), 60.0);
  const Discretizer disc(2, thr);
  const WhittleModel wm = estimate_transitions(historical, disc, 1, 3, 0.9, 1234);
  const WhittleIndexCache cache = build_whittle_cache(wm);

  std::vector<char> exclude(90, 0);
  for (int i = 0; i < 90; ++i) {
    exclude[static_cast<std::size_t>(i)] = kind_of_arm(i) == AgentKind::random_agent ? 1 : 0;
  }

  std::map<std::string, std::vector<double>> ef;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto population = sample_population(30, GenMode::test, seed);
    TariPolicy tari(&forecaster, 52);
    WhittlePolicy whittle(wm, cache);
    RoundRobinPolicy round_robin;
    RandomPolicy random;
    ControlPolicy control;
    const std::vector<std::pair<std::string, Policy*>> policies = {
        {"tari", &tari},       {"whittle", &whittle}, {"round_robin", &round_robin},
        {"random", &random},   {"control", &control}};
    for (const auto& [name, policy] : policies) {
      const EpisodeLog log = run_synthetic_episode(instance, population, *policy, seed);
      validate_budget(log);
      ef[name].push_back(mean_of(engaged_fraction(log, thr, exclude)));
    }
  }

  const double tari = mean_of(ef["tari"]);
  const double whittle = mean_of(ef["whittle"]);
  const double rr = mean_of(ef["round_robin"]);
  const double random = mean_of(ef["random"]);
  const double control = mean_of(ef["control"]);
  const double weaker_baseline = std::max(rr, random);

  std::vector<std::string> unmet;
  if (!(tari > whittle)) unmet.push_back("tari > whittle");
  if (!(whittle > weaker_baseline)) unmet.push_back("whittle > max(round_robin, random)");
  if (!(weaker_baseline > control)) unmet.push_back("max(round_robin, random) > control");
  if (!(tari >= 1.2 * whittle)) unmet.push_back("tari >= 1.2 x whittle");

  Outcome out;
  out.pass = unmet.empty();
  out.detail = "mean engaged fraction over 10 seeds (random-kind arms excluded): tari=" +
               fmt(tari) + " whittle=" + fmt(whittle) + " round_robin=" + fmt(rr) +
               " random=" + fmt(random) + " control=" + fmt(control);
  if (!unmet.empty()) {
    out.detail += "; unmet:";
    for (const std::string& u : unmet) out.detail += " [" + u + "]";
  }
  return out;
}

// ---------------------------------------------------------------------------
// criterion 3: index solver vs subsidy sweep
// ---------------------------------------------------------------------------

double reference_preference(const WhittleModel& wm, int cluster, int target, double m) {
  const int S = wm.expanded_size();
  const int n_bins = wm.discretizer().n_bins();
  std::vector<double> V(static_cast<std::size_t>(S), 0.0);
  for (int sweep = 0; sweep < 100000; ++sweep) {
    double delta = 0.0;
    std::vector<double> V2(V.size());
    for (int s = 0; s < S; ++s) {
      double qp = m + wm.state_reward(s);
      double qa = wm.state_reward(s);
      for (int b = 0; b < n_bins; ++b) {
        const double v = V[static_cast<std::size_t>(wm.successor(s, b))];
        qp += wm.gamma() * wm.prob(cluster, s, Action::passive, b) * v;
        qa += wm.gamma() * wm.prob(cluster, s, Action::active, b) * v;
      }
      V2[static_cast<std::size_t>(s)] = std::max(qp, qa);
      delta = std::max(delta,
                       std::abs(V2[static_cast<std::size_t>(s)] - V[static_cast<std::size_t>(s)]));
    }
    V.swap(V2);
    if (delta < 1e-10) break;
  }
  double qp = m + wm.state_reward(target);
  double qa = wm.state_reward(target);
  for (int b = 0; b < n_bins; ++b) {
    const double v = V[static_cast<std::size_t>(wm.successor(target, b))];
    qp += wm.gamma() * wm.prob(cluster, target, Action::passive, b) * v;
    qa += wm.gamma() * wm.prob(cluster, target, Action::active, b) * v;
  }
  return qp - qa;
}

// Smallest subsidy with weak passive preference, found by a progressively
// refined scan whose final grid step is 1e-7.
bool reference_whittle(const WhittleModel& wm, int cluster, int target, double* result) {
  double lo = -12.0;
  double hi = 12.0;
  double step = 1e-3;
  for (int pass = 0; pass < 3; ++pass) {
    double first_nonneg = hi;
    bool found = false;
    for (double m = lo; m <= hi + 0.5 * step; m += step) {
      if (reference_preference(wm, cluster, target, m) >= 0.0) {
        first_nonneg = m;
        found = true;
        break;
      }
    }
    if (!found) return false;
    if (pass == 0 && first_nonneg == lo) return false;  // index below the scanned range
    lo = first_nonneg - step;
    hi = first_nonneg;
    step *= 0.01;
  }
  *result = hi;
  return true;
}

Trajectory transition_traj(int arm_id, double s, Action a, double next) {
  Trajectory tr;
  tr.arm_id = arm_id;
  tr.steps = {Step{EngagementState(s), a}, Step{EngagementState(next), Action::passive}};
  return tr;
}

Outcome criterion3() {
  const Discretizer disc(2, EngagementState(0.25));
  const double rep[2] = {0.1, 0.9};  // bin representatives
  Rng rng(909);
  double max_err = 0.0;
  int checked = 0;
  std::string failure;

  for (int arm = 0; arm < 50 && failure.empty(); ++arm) {
    // Random rational transition table: P(next engaging | s, a) = num / 20.
    std::vector<Trajectory> trajs;
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        const int num = static_cast<int>(rng.uniform_int(1, 19));
        const Action action = a == 1 ? Action::active : Action::passive;
        for (int c = 0; c < num; ++c) {
          trajs.push_back(transition_traj(static_cast<int>(trajs.size()), rep[s], action, 0.9));
        }
        for (int c = 0; c < 20 - num; ++c) {
          trajs.push_back(transition_traj(static_cast<int>(trajs.size()), rep[s], action, 0.1));
        }
      }
    }
    const WhittleModel wm = estimate_transitions(trajs, disc, 1, 1, 0.9, 5);
    for (int state = 0; state < 2; ++state) {
      double reference = 0.0;
      if (!reference_whittle(wm, 0, state, &reference)) {
        failure = " sweep found no indifference point (arm " + std::to_string(arm) + ")";
        break;
      }
      const double solved = whittle_index(wm, 0, state);
      const double err = std::abs(solved - reference);
      max_err = std::max(max_err, err);
      ++checked;
      if (err > 1e-5) {
        failure = " arm " + std::to_string(arm) + " state " + std::to_string(state) +
                  ": solver " + fmt(solved, 7) + " vs sweep " + fmt(reference, 7);
        break;
      }
    }
  }

  Outcome out;
  out.pass = failure.empty();
  out.detail = "index solver vs 1e-7 subsidy sweep on 50 random 2-state arms (" +
               std::to_string(checked) + " states): max |diff| = " + fmt(max_err, 8) + failure;
  return out;
}

// ---------------------------------------------------------------------------
// criterion 4: order diagnostic on a planted order-3 process
// ---------------------------------------------------------------------------

Outcome criterion4() {
  // Binary process that copies the bit from three steps back. Every initial
  // triple appears equally often (five copies of each of the eight), so
  // orders 1 and 2 pool to coin flips while order >= 3 is fully
  // deterministic.
  std::vector<Trajectory> trajs;
  for (int arm = 0; arm < 40; ++arm) {
    std::vector<int> bits(150);
    for (int t = 0; t < 3; ++t) bits[static_cast<std::size_t>(t)] = (arm >> t) & 1;
    for (int t = 3; t < 150; ++t) {
      bits[static_cast<std::size_t>(t)] = bits[static_cast<std::size_t>(t - 3)];
    }
    Trajectory tr;
    tr.arm_id = arm;
    for (int b : bits) {
      tr.steps.push_back(Step{EngagementState(b == 1 ? 0.9 : 0.1), Action::passive});
    }
    trajs.push_back(std::move(tr));
  }

  const Discretizer disc(2, EngagementState(0.25));
  const LikelihoodReport report = likelihood_report(trajs, 5, disc);
  const std::vector<double>& l = report.mean_negloglik;
  const double rel2 = report.relative_improvement_pct[1];
  const double drop3 = (l[0] - l[2]) / l[0];

  std::vector<std::string> unmet;
  if (!(std::abs(rel2) <= 2.5)) unmet.push_back("order-2 improvement ~ 0 (within 2.5%)");
  if (!(drop3 >= 0.05)) unmet.push_back("order-3 beats order-1 by >= 5%");
  for (int h = 4; h <= 5; ++h) {
    if (!(std::abs(l[static_cast<std::size_t>(h - 1)] - l[2]) <= 0.02 * l[2] + 1e-9)) {
      unmet.push_back("order-" + std::to_string(h) + " within 2% of order-3");
    }
  }

  Outcome out;
  out.pass = unmet.empty();
  out.detail = "planted order-3 process: mean neg-log-lik l(1..5) = " + fmt(l[0], 3) + ", " +
               fmt(l[1], 3) + ", " + fmt(l[2], 3) + ", " + fmt(l[3], 3) + ", " + fmt(l[4], 3) +
               "; order-2 improvement " + fmt(rel2, 2) + "%, order-3 drop " +
               fmt(100.0 * drop3, 1) + "%";
  if (!unmet.empty()) {
    out.detail += "; unmet:";
    for (const std::string& u : unmet) out.detail += " [" + u + "]";
  }
  return out;
}

// ---------------------------------------------------------------------------
// criterion 5: sliding-window arithmetic
// ---------------------------------------------------------------------------

Outcome criterion5() {
  Trajectory tr;
  tr.arm_id = 0;
  for (int t = 0; t < 31; ++t) {
    tr.steps.push_back(Step{EngagementState(0.5), Action::passive});
  }
  const auto windows = build_windows({tr}, 8);
  Outcome out;
  out.pass = windows.size() == 23;
  out.detail = "31-step trajectory with an 8-step window yields " +
               std::to_string(windows.size()) + " samples (want 23)";
  return out;
}

// ---------------------------------------------------------------------------
// criterion 6: forecaster quality gate
// ---------------------------------------------------------------------------

Outcome criterion6() {
  const auto historical = generate_historical_dataset(30, 52, GenMode::train, 1234);
  const LinearARModel model = fit_linear_ar(build_windows(historical, 7), 1e-4);

  std::vector<double> maes;
  bool all_ok = true;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto population = sample_population(30, GenMode::test, seed);
    std::vector<Trajectory> held_out;
    for (std::size_t i = 0; i < population.size(); ++i) {
      if (population[i].kind == AgentKind::random_agent) continue;
      held_out.push_back(rollout_agent(population[i], static_cast<int>(i),
                                       std::vector<Action>(52, Action::passive)));
    }
    const double mae = walk_forward_mae(model, held_out, 7, 1);
    maes.push_back(mae);
    all_ok = all_ok && mae <= 0.05;
  }

  Outcome out;
  out.pass = all_ok;
  out.detail =
      "1-step walk-forward MAE on uncalled held-out populations (random-kind arms excluded), "
      "seeds 1-3: " +
      fmt(maes[0]) + ", " + fmt(maes[1]) + ", " + fmt(maes[2]) + " (gate 0.05)";
  return out;
}

// ---------------------------------------------------------------------------
// criterion 7: replay identity
// ---------------------------------------------------------------------------

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

Outcome criterion7() {
  const auto dataset = generate_historical_dataset(5, 20, GenMode::train, 7);
  HistoricalPolicy policy(&dataset);
  ReplayConfig cfg;
  cfg.method = ReplayMethod::full_counterfactual;
  cfg.counterfactual_model = nullptr;  // a single call would therefore throw
  cfg.observation_weeks = 1;
  cfg.threshold = EngagementState(0.25);
  ReplayStats stats;
  const EpisodeLog log = replay_offline(dataset, policy, cfg, 0.3, 5, &stats);

  const std::string path_in = "acceptance_scratch_dataset.csv";
  const std::string path_out = "acceptance_scratch_replayed.csv";
  write_trajectories_csv(path_in, dataset);
  write_trajectories_csv(path_out, trajectories_from_log(log));
  const bool identical = slurp(path_in) == slurp(path_out);
  std::remove(path_in.c_str());
  std::remove(path_out.c_str());

  Outcome out;
  out.pass = identical && stats.counterfactual_calls == 0;
  out.detail = "historical replay of 15 arms x 20 weeks: serialized logs " +
               std::string(identical ? "byte-identical" : "DIFFER") + ", " +
               std::to_string(stats.counterfactual_calls) + " counterfactual calls";
  return out;
}

// ---------------------------------------------------------------------------
// criterion 8: invariant suite
// ---------------------------------------------------------------------------

Outcome criterion8() {
  std::vector<std::string> unmet;
  const EngagementState thr(0.25);

  // Budget invariant across policies, including a replay log.
  try {
    const auto population = sample_population(3, GenMode::test, 2);
    const ProblemInstance instance(9, 2, 20, thr);
    RandomPolicy random;
    RoundRobinPolicy round_robin;
    ControlPolicy control;
    validate_budget(run_synthetic_episode(instance, population, random, 1));
    validate_budget(run_synthetic_episode(instance, population, round_robin, 1));
    validate_budget(run_synthetic_episode(instance, population, control, 1));
    const auto dataset = generate_historical_dataset(4, 16, GenMode::train, 6);
    HistoricalPolicy historical(&dataset);
    ReplayConfig rcfg;
    rcfg.observation_weeks = 1;
    rcfg.threshold = thr;
    validate_budget(replay_offline(dataset, historical, rcfg, 0.2, 3));
  } catch (const std::exception& e) {
    unmet.push_back(std::string("budget invariant: ") + e.what());
  }

  // Index branch counts stay inside [1, H+1].
  const auto corpus = generate_historical_dataset(10, 30, GenMode::train, 14);
  const LinearARModel model = fit_linear_ar(build_windows(corpus, 5), 1e-3);
  {
    Rng rng(88);
    const int H = 10;
    bool ok = true;
    for (int q = 0; q < 200 && ok; ++q) {
      std::vector<Step> hist;
      for (int j = 0; j < 5; ++j) {
        hist.push_back(Step{EngagementState(rng.uniform01()),
                            rng.coin_flip() ? Action::active : Action::passive});
      }
      const std::vector<double> aux = {rng.uniform01()};
      const TariIndex idx =
          tari_index(model, hist, aux, EngagementState(rng.uniform01()), thr, H);
      ok = idx.u >= 1 && idx.u <= H + 1 && idx.v >= 1 && idx.v <= H + 1;
    }
    if (!ok) unmet.push_back("index branch counts in [1, H+1]");
  }

  // Estimated transition rows are probability distributions.
  {
    bool ok = true;
    for (int hw = 1; hw <= 2 && ok; ++hw) {
      const WhittleModel wm =
          estimate_transitions(corpus, Discretizer(2, thr), hw, 3, 0.9, 3);
      for (int c = 0; c < wm.n_clusters() && ok; ++c) {
        for (int s = 0; s < wm.expanded_size() && ok; ++s) {
          for (Action a : {Action::passive, Action::active}) {
            double sum = 0.0;
            for (int b = 0; b < 2; ++b) {
              const double p = wm.prob(c, s, a, b);
              if (p < 0.0) ok = false;
              sum += p;
            }
            if (std::abs(sum - 1.0) > 1e-12) ok = false;
          }
        }
      }
    }
    if (!ok) unmet.push_back("transition rows sum to 1");
  }

  // Selection is invariant to positive affine transforms of the scores.
  {
    Rng score_rng(17);
    bool ok = true;
    for (int trial = 0; trial < 50 && ok; ++trial) {
      std::vector<double> scores(12);
      for (double& s : scores) s = static_cast<double>(score_rng.uniform_int(0, 5)) / 5.0;
      const int k = static_cast<int>(score_rng.uniform_int(1, 11));
      std::vector<double> scaled(scores.size());
      for (std::size_t j = 0; j < scores.size(); ++j) scaled[j] = 3.7 * scores[j] - 1.25;
      Rng r1(1000 + static_cast<std::uint64_t>(trial));
      Rng r2(1000 + static_cast<std::uint64_t>(trial));
      ok = select_top_k(scores, k, r1).arm_ids == select_top_k(scaled, k, r2).arm_ids;
    }
    if (!ok) unmet.push_back("affine invariance of top-k selection");
  }

  // Ties break uniformly: chi-square over 10k draws, 10 tied arms, p > 0.01.
  {
    Rng rng(424);
    const std::vector<double> tied(10, 0.7);
    std::vector<int> counts(10, 0);
    for (int draw = 0; draw < 10000; ++draw) {
      const auto pick = select_top_k(tied, 1, rng);
      counts[static_cast<std::size_t>(pick.arm_ids[0])]++;
    }
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - 1000.0) * (c - 1000.0) / 1000.0;
    if (!(chi2 < 21.666)) {  // 0.99 quantile, 9 degrees of freedom
      unmet.push_back("tie uniformity (chi-square " + fmt(chi2, 2) + " >= 21.666)");
    }
  }

  // Parallel scoring must not change results.
  {
    const auto population = sample_population(3, GenMode::test, 4);
    const ProblemInstance instance(9, 2, 10, thr);
    TariPolicy tari(&model, 10);
    setenv("RESTLESS_LAB_THREADS", "1", 1);
    const EpisodeLog serial = run_synthetic_episode(instance, population, tari, 9);
    setenv("RESTLESS_LAB_THREADS", "5", 1);
    const EpisodeLog threaded = run_synthetic_episode(instance, population, tari, 9);
    unsetenv("RESTLESS_LAB_THREADS");
    if (!(serial.states == threaded.states && serial.actions == threaded.actions)) {
      unmet.push_back("determinism across worker counts");
    }
  }

  Outcome out;
  out.pass = unmet.empty();
  out.detail =
      "budget audit, index bounds, row normalization, affine-invariant tie-uniform selection, "
      "thread-count determinism";
  if (!unmet.empty()) {
    out.detail += "; unmet:";
    for (const std::string& u : unmet) out.detail += " [" + u + "]";
  }
  return out;
}

// ---------------------------------------------------------------------------
// criterion 9: engagement-improvement metric self-consistency
// ---------------------------------------------------------------------------

EpisodeLog random_log(Rng& rng, int T, int n) {
  EpisodeLog log;
  log.policy = "hand";
  log.n_arms = n;
  log.threshold = EngagementState(0.25);
  for (int i = 0; i < n; ++i) log.arm_ids.push_back(i);
  for (int t = 0; t < T; ++t) {
    std::vector<double> row(static_cast<std::size_t>(n));
    for (double& v : row) v = rng.uniform01();
    log.states.push_back(row);
    log.actions.emplace_back(static_cast<std::size_t>(n), 0);
    log.budgets.push_back(0);
  }
  return log;
}

Outcome criterion9() {
  const EngagementState thr(0.25);
  Rng rng(55);
  double max_residual = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int T = static_cast<int>(rng.uniform_int(3, 12));
    const int n = static_cast<int>(rng.uniform_int(2, 8));
    const EpisodeLog a = random_log(rng, T, n);
    const EpisodeLog b = random_log(rng, T, n);
    const ImprovementMetrics m = improvement_metrics(a, b, thr);
    max_residual =
        std::max(max_residual, std::abs(m.mean_weekly_engagement_improvement * T -
                                        m.cumulative_additional_engagement));
  }

  const EpisodeLog same = random_log(rng, 8, 5);
  const ImprovementMetrics z = improvement_metrics(same, same, thr);
  const bool zeros = z.mean_weekly_engagement_improvement == 0.0 &&
                     z.mean_relative_engagement_improvement_pct == 0.0 &&
                     z.cumulative_additional_engagement == 0.0 &&
                     z.cumulative_additional_duration_seconds == 0.0 &&
                     z.relative_cumulative_engagement_pct == 0.0;

  Outcome out;
  out.pass = max_residual <= 1e-9 && zeros;
  out.detail = "mean-weekly x horizon vs cumulative on 20 random log pairs: max residual " +
               fmt(max_residual, 12) + "; identical logs all-zero: " + (zeros ? "yes" : "NO");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}};

  std::vector<int> wanted;
  for (int a = 1; a < argc; ++a) {
    const int n = std::atoi(argv[a]);
    if (n < 1 || n > 9) {
      std::fprintf(stderr, "usage: %s [criterion numbers 1-9]\n", argv[0]);
      return 64;
    }
    wanted.push_back(n);
  }
  if (wanted.empty()) {
    for (const auto& [n, fn] : criteria) wanted.push_back(n);
  }

  int failures = 0;
  for (int n : wanted) {
    for (const auto& [num, fn] : criteria) {
      if (num != n) continue;
      Outcome out;
      try {
        out = fn();
      } catch (const std::exception& e) {
        out.pass = false;
        out.detail = std::string("unexpected exception: ") + e.what();
      }
      std::printf("[%s] criterion %d: %s\n", out.pass ? "PASS" : "FAIL", n, out.detail.c_str());
      std::fflush(stdout);
      if (!out.pass) ++failures;
    }
  }
  return failures;
}

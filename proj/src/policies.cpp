#include "restless/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace restless {
namespace {

constexpr double kValueIterTol = 1e-9;
constexpr int kValueIterMaxSweeps = 100000;
constexpr double kBisectGap = 1e-6;
constexpr double kInitialBracket = 10.0;
constexpr int kMaxWidenings = 4;

int checked_power(int base, int exp) {
  std::int64_t p = 1;
  for (int i = 0; i < exp; ++i) {
    p *= base;
    if (p > 10'000'000) {
      throw std::invalid_argument("expanded state space too large (n_bins^hw > 1e7)");
    }
  }
  return static_cast<int>(p);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d2 = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    d2 += diff * diff;
  }
  return d2;
}

}  // namespace

TariIndex tari_index(const ForecastModel& model, std::span<const Step> history,
                     std::span<const double> aux, EngagementState s_t,
                     EngagementState threshold, int H) {
  if (H < 1) throw std::invalid_argument("tari_index: horizon must be >= 1");
  const auto run_branch = [&](Action first) {
    std::vector<Step> rolling(history.begin(), history.end());
    EngagementState s = s_t;
    Action a = first;
    int count = 1;
    EngagementState next = model.predict_next(rolling, aux, s, a);
    while (next.value() >= threshold.value() && count <= H) {
      rolling.erase(rolling.begin());
      rolling.push_back(Step{s, a});
      s = next;
      a = Action::passive;  // only the first step of the act branch is active
      ++count;
      next = model.predict_next(rolling, aux, s, a);
    }
    return count;
  };
  TariIndex idx;
  idx.u = run_branch(Action::active);
  idx.v = run_branch(Action::passive);
  idx.index = static_cast<double>(idx.u) / static_cast<double>(idx.v);
  return idx;
}

PolicyDecision select_top_k(const std::vector<double>& scores, int k, Rng& rng) {
  const int n = static_cast<int>(scores.size());
  if (k < 0 || k > n) throw std::invalid_argument("select_top_k: k must be in [0, n_arms]");
  // Random permutation first, then a stable sort: arms with equal scores keep
  // their shuffled order, so ties resolve uniformly at random.
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[static_cast<std::size_t>(a)] >
                                              scores[static_cast<std::size_t>(b)]; });
  PolicyDecision decision;
  decision.arm_ids.assign(order.begin(), order.begin() + k);
  std::sort(decision.arm_ids.begin(), decision.arm_ids.end());
  return decision;
}

WhittleModel::WhittleModel(Discretizer d, int hw, double gamma, int n_clusters)
    : d_(d), hw_(hw), gamma_(gamma), n_clusters_(n_clusters) {
  if (hw_ < 1) throw std::invalid_argument("history order hw must be >= 1");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
  if (n_clusters_ < 1) throw std::invalid_argument("n_clusters must be >= 1");
  expanded_size_ = checked_power(d_.n_bins(), hw_);
  probs_.assign(static_cast<std::size_t>(n_clusters_) * static_cast<std::size_t>(expanded_size_) *
                    2 * static_cast<std::size_t>(d_.n_bins()),
                0.0);
}

double WhittleModel::prob(int cluster, int expanded, Action a, int next_bin) const {
  const auto idx =
      ((static_cast<std::size_t>(cluster) * static_cast<std::size_t>(expanded_size_) +
        static_cast<std::size_t>(expanded)) *
           2 +
       static_cast<std::size_t>(action_index(a))) *
          static_cast<std::size_t>(d_.n_bins()) +
      static_cast<std::size_t>(next_bin);
  return probs_[idx];
}

double WhittleModel::state_reward(int expanded) const {
  const int newest_bin = expanded % d_.n_bins();
  return static_cast<double>(
      reward(d_.midpoint(newest_bin), EngagementState(d_.threshold())));
}

int WhittleModel::successor(int expanded, int next_bin) const {
  // Appending the next bin shifts out the oldest (most significant) digit.
  return (expanded * d_.n_bins() + next_bin) % expanded_size_;
}

int WhittleModel::cluster_of(std::span<const double> features) const {
  if (n_clusters_ == 1) return 0;
  if (features.size() != centroids_.front().size()) {
    throw std::invalid_argument("feature dimension does not match cluster centroids");
  }
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int c = 0; c < n_clusters_; ++c) {
    const double d2 = squared_distance(features, centroids_[static_cast<std::size_t>(c)]);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

int WhittleModel::expanded_state_of(std::span<const Step> observed) const {
  if (observed.empty()) {
    throw std::invalid_argument("expanded_state_of: no observed history");
  }
  std::vector<int> bins(static_cast<std::size_t>(hw_));
  const auto n = static_cast<std::ptrdiff_t>(observed.size());
  for (int slot = 0; slot < hw_; ++slot) {
    // Slot hw_-1 is the newest observation; earlier slots pad with the first
    // observed state when the history is still short.
    const std::ptrdiff_t pos = n - hw_ + slot;
    const auto& step = observed[static_cast<std::size_t>(std::max<std::ptrdiff_t>(pos, 0))];
    bins[static_cast<std::size_t>(slot)] = d_.bin_of(step.state);
  }
  return static_cast<int>(encode_bins(bins, d_.n_bins()));
}

IndexabilityWarning::IndexabilityWarning(double lo_in, double hi_in)
    : std::runtime_error("no indifference point in subsidy bracket [" + std::to_string(lo_in) +
                         ", " + std::to_string(hi_in) + "]"),
      lo(lo_in),
      hi(hi_in) {}

WhittleModel estimate_transitions(const std::vector<Trajectory>& historical, const Discretizer& d,
                                  int hw, int n_clusters, double gamma, std::uint64_t seed) {
  if (historical.empty()) throw std::invalid_argument("estimate_transitions: empty dataset");
  WhittleModel wm(d, hw, gamma, n_clusters);
  const int n_bins = d.n_bins();
  const int S = wm.expanded_size();

  // --- cluster assignment -------------------------------------------------
  const auto n_arms = historical.size();
  std::vector<int> assignment(n_arms, 0);
  if (n_clusters == 1) {
    // Pooled model; keep the mean feature vector as the single centroid so
    // cluster_of stays well-defined.
    std::size_t dim = historical.front().features.size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& traj : historical) {
      if (traj.features.size() != dim) {
        throw std::invalid_argument("estimate_transitions: inconsistent feature lengths");
      }
      for (std::size_t j = 0; j < dim; ++j) mean[j] += traj.features[j];
    }
    for (auto& m : mean) m /= static_cast<double>(n_arms);
    wm.centroids_ = {mean};
  } else {
    const std::size_t dim = historical.front().features.size();
    if (dim == 0) {
      throw std::invalid_argument("estimate_transitions: clustering needs arm features");
    }
    for (const auto& traj : historical) {
      if (traj.features.size() != dim) {
        throw std::invalid_argument("estimate_transitions: inconsistent feature lengths");
      }
    }
    if (static_cast<std::size_t>(n_clusters) > n_arms) {
      throw std::invalid_argument("estimate_transitions: more clusters than arms");
    }
    // Lloyd's algorithm, seeded start from distinct arms, at most 100 rounds.
    Rng rng(derive_seed(seed, 0x6b6d));
    const auto init = rng.sample_without_replacement(static_cast<int>(n_arms), n_clusters);
    std::vector<std::vector<double>> centroids;
    for (int idx : init) centroids.push_back(historical[static_cast<std::size_t>(idx)].features);
    for (int round = 0; round < 100; ++round) {
      bool changed = false;
      for (std::size_t i = 0; i < n_arms; ++i) {
        int best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (int c = 0; c < n_clusters; ++c) {
          const double d2 =
              squared_distance(historical[i].features, centroids[static_cast<std::size_t>(c)]);
          if (d2 < best_d2) {
            best_d2 = d2;
            best = c;
          }
        }
        if (assignment[i] != best) {
          assignment[i] = best;
          changed = true;
        }
      }
      if (!changed && round > 0) break;
      std::vector<std::vector<double>> sums(static_cast<std::size_t>(n_clusters),
                                            std::vector<double>(dim, 0.0));
      std::vector<int> sizes(static_cast<std::size_t>(n_clusters), 0);
      for (std::size_t i = 0; i < n_arms; ++i) {
        const auto c = static_cast<std::size_t>(assignment[i]);
        ++sizes[c];
        for (std::size_t j = 0; j < dim; ++j) sums[c][j] += historical[i].features[j];
      }
      for (int c = 0; c < n_clusters; ++c) {
        const auto cu = static_cast<std::size_t>(c);
        if (sizes[cu] == 0) {
          // Re-seed an emptied cluster at a random arm to keep k clusters.
          centroids[cu] =
              historical[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n_arms) - 1))]
                  .features;
          continue;
        }
        for (std::size_t j = 0; j < dim; ++j) centroids[cu][j] = sums[cu][j] / sizes[cu];
      }
    }
    wm.centroids_ = std::move(centroids);
  }

  // --- transition counts with the fallback ladder -------------------------
  const auto row_index = [&](int c, int es, int a) {
    return ((static_cast<std::size_t>(c) * static_cast<std::size_t>(S) +
             static_cast<std::size_t>(es)) *
                2 +
            static_cast<std::size_t>(a)) *
           static_cast<std::size_t>(n_bins);
  };
  std::vector<std::int64_t> counts(wm.probs_.size(), 0);
  std::vector<std::int64_t> cluster_marginal(
      static_cast<std::size_t>(n_clusters) * 2 * static_cast<std::size_t>(n_bins), 0);
  std::vector<std::int64_t> global_marginal(2 * static_cast<std::size_t>(n_bins), 0);
  for (std::size_t i = 0; i < n_arms; ++i) {
    const auto& traj = historical[i];
    const auto L = static_cast<std::ptrdiff_t>(traj.steps.size());
    if (L < hw + 1) continue;
    std::vector<int> bins(traj.steps.size());
    for (std::size_t t = 0; t < traj.steps.size(); ++t) bins[t] = d.bin_of(traj.steps[t].state);
    int es = 0;
    for (int slot = 0; slot < hw; ++slot) es = es * n_bins + bins[static_cast<std::size_t>(slot)];
    for (std::ptrdiff_t t = hw - 1; t + 1 < L; ++t) {
      const int a = action_index(traj.steps[static_cast<std::size_t>(t)].action);
      const int nb = bins[static_cast<std::size_t>(t) + 1];
      ++counts[row_index(assignment[i], es, a) + static_cast<std::size_t>(nb)];
      ++cluster_marginal[(static_cast<std::size_t>(assignment[i]) * 2 +
                          static_cast<std::size_t>(a)) *
                             static_cast<std::size_t>(n_bins) +
                         static_cast<std::size_t>(nb)];
      ++global_marginal[static_cast<std::size_t>(a) * static_cast<std::size_t>(n_bins) +
                        static_cast<std::size_t>(nb)];
      es = wm.successor(es, nb);
    }
  }

  const auto normalize_into = [&](std::size_t dst, const std::int64_t* row) -> bool {
    std::int64_t total = 0;
    for (int b = 0; b < n_bins; ++b) total += row[b];
    if (total == 0) return false;
    for (int b = 0; b < n_bins; ++b) {
      wm.probs_[dst + static_cast<std::size_t>(b)] =
          static_cast<double>(row[b]) / static_cast<double>(total);
    }
    return true;
  };
  for (int c = 0; c < n_clusters; ++c) {
    for (int es = 0; es < S; ++es) {
      for (int a = 0; a < 2; ++a) {
        const auto dst = row_index(c, es, a);
        if (normalize_into(dst, &counts[dst])) continue;
        const auto cm = &cluster_marginal[(static_cast<std::size_t>(c) * 2 +
                                           static_cast<std::size_t>(a)) *
                                          static_cast<std::size_t>(n_bins)];
        if (normalize_into(dst, cm)) continue;
        const auto gm = &global_marginal[static_cast<std::size_t>(a) *
                                         static_cast<std::size_t>(n_bins)];
        if (normalize_into(dst, gm)) continue;
        for (int b = 0; b < n_bins; ++b) {
          wm.probs_[dst + static_cast<std::size_t>(b)] = 1.0 / n_bins;
        }
      }
    }
  }
  return wm;
}

namespace {

// Action preference Q^m(s|passive) - Q^m(s|active) at the target state under
// the subsidy-augmented Bellman equations, solved by value iteration.
double action_preference(const WhittleModel& wm, int cluster, int target, double m) {
  const int S = wm.expanded_size();
  const int n_bins = wm.discretizer().n_bins();
  std::vector<double> V(static_cast<std::size_t>(S), 0.0);
  std::vector<double> V_next(static_cast<std::size_t>(S), 0.0);
  for (int sweep = 0; sweep < kValueIterMaxSweeps; ++sweep) {
    double max_delta = 0.0;
    for (int s = 0; s < S; ++s) {
      double q_passive = m + wm.state_reward(s);
      double q_active = wm.state_reward(s);
      for (int b = 0; b < n_bins; ++b) {
        const double v_succ = V[static_cast<std::size_t>(wm.successor(s, b))];
        q_passive += wm.gamma() * wm.prob(cluster, s, Action::passive, b) * v_succ;
        q_active += wm.gamma() * wm.prob(cluster, s, Action::active, b) * v_succ;
      }
      const double v_new = std::max(q_passive, q_active);
      max_delta = std::max(max_delta, std::abs(v_new - V[static_cast<std::size_t>(s)]));
      V_next[static_cast<std::size_t>(s)] = v_new;
    }
    V.swap(V_next);
    if (max_delta < kValueIterTol) break;
  }
  double q_passive = m + wm.state_reward(target);
  double q_active = wm.state_reward(target);
  for (int b = 0; b < n_bins; ++b) {
    const double v_succ = V[static_cast<std::size_t>(wm.successor(target, b))];
    q_passive += wm.gamma() * wm.prob(cluster, target, Action::passive, b) * v_succ;
    q_active += wm.gamma() * wm.prob(cluster, target, Action::active, b) * v_succ;
  }
  return q_passive - q_active;
}

}  // namespace

double whittle_index(const WhittleModel& wm, int cluster, int expanded_state) {
  if (cluster < 0 || cluster >= wm.n_clusters()) {
    throw std::invalid_argument("whittle_index: cluster out of range");
  }
  if (expanded_state < 0 || expanded_state >= wm.expanded_size()) {
    throw std::invalid_argument("whittle_index: expanded state out of range");
  }
  double lo = -kInitialBracket;
  double hi = kInitialBracket;
  double g_lo = action_preference(wm, cluster, expanded_state, lo);
  double g_hi = action_preference(wm, cluster, expanded_state, hi);
  // The preference is nondecreasing in the subsidy; widen until it brackets 0.
  for (int w = 0; w < kMaxWidenings && (g_lo > 0.0 || g_hi < 0.0); ++w) {
    if (g_lo > 0.0) {
      lo *= 2.0;
      g_lo = action_preference(wm, cluster, expanded_state, lo);
    }
    if (g_hi < 0.0) {
      hi *= 2.0;
      g_hi = action_preference(wm, cluster, expanded_state, hi);
    }
  }
  if (g_lo > 0.0 || g_hi < 0.0) throw IndexabilityWarning(lo, hi);
  while (hi - lo > kBisectGap) {
    const double mid = 0.5 * (lo + hi);
    if (action_preference(wm, cluster, expanded_state, mid) >= 0.0) {
      hi = mid;  // indifferent or passive-preferring: the smallest such m is left of here
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double WhittleIndexCache::at(const WhittleModel& wm, int cluster, int expanded) const {
  return index[static_cast<std::size_t>(cluster) * static_cast<std::size_t>(wm.expanded_size()) +
               static_cast<std::size_t>(expanded)];
}

WhittleIndexCache build_whittle_cache(const WhittleModel& wm) {
  WhittleIndexCache cache;
  cache.index.assign(
      static_cast<std::size_t>(wm.n_clusters()) * static_cast<std::size_t>(wm.expanded_size()),
      0.0);
  for (int c = 0; c < wm.n_clusters(); ++c) {
    for (int es = 0; es < wm.expanded_size(); ++es) {
      try {
        cache.index[static_cast<std::size_t>(c) * static_cast<std::size_t>(wm.expanded_size()) +
                    static_cast<std::size_t>(es)] = whittle_index(wm, c, es);
      } catch (const IndexabilityWarning&) {
        // Non-indexable states sink to the bottom of every ranking.
        cache.index[static_cast<std::size_t>(c) * static_cast<std::size_t>(wm.expanded_size()) +
                    static_cast<std::size_t>(es)] =
            -std::numeric_limits<double>::infinity();
        ++cache.n_warnings;
      }
    }
  }
  return cache;
}

PolicyDecision whittle_select(const WhittleModel& wm, const WhittleIndexCache& cache,
                              const std::vector<std::vector<Step>>& observed,
                              const std::vector<std::vector<double>>& features, int k, Rng& rng) {
  if (observed.size() != features.size()) {
    throw std::invalid_argument("whittle_select: observed/features size mismatch");
  }
  std::vector<double> scores(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const int cluster = wm.cluster_of(features[i]);
    const int es = wm.expanded_state_of(observed[i]);
    scores[i] = cache.at(wm, cluster, es);
  }
  return select_top_k(scores, k, rng);
}

PolicyDecision round_robin_select(int& cursor, int n_arms, int k) {
  if (n_arms < 1) throw std::invalid_argument("round_robin_select: need at least one arm");
  if (k < 0 || k > n_arms) throw std::invalid_argument("round_robin_select: k out of range");
  if (cursor < 0 || cursor >= n_arms) cursor %= n_arms;
  PolicyDecision decision;
  decision.arm_ids.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) decision.arm_ids.push_back((cursor + i) % n_arms);
  cursor = (cursor + k) % n_arms;
  std::sort(decision.arm_ids.begin(), decision.arm_ids.end());
  return decision;
}

PolicyDecision random_select(int n_arms, int k, Rng& rng) {
  if (k < 0 || k > n_arms) throw std::invalid_argument("random_select: k out of range");
  auto ids = rng.sample_without_replacement(n_arms, k);
  std::sort(ids.begin(), ids.end());
  return PolicyDecision{std::move(ids)};
}

PolicyDecision control_select() { return PolicyDecision{}; }

}  // namespace restless

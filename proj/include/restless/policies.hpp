// Planners: the forecast-based time-to-disengagement ratio index, the
// Whittle index over discretized (optionally history-expanded, feature-
// clustered) transition models, and the round-robin / random / control
// baselines, plus top-k selection with randomized tie-breaking.
#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "restless/core.hpp"
#include "restless/forecast.hpp"
#include "restless/rng.hpp"

namespace restless {

// Forecast index for one arm: u = predicted steps until disengagement if we
// act once now, v = the same if we never act; larger u/v = more valuable call.
struct TariIndex {
  int arm_id = 0;
  int u = 1;
  int v = 1;
  double index = 1.0;
};

// Runs the two forecast branches (first action active vs passive, passive
// thereafter), counting steps until the predicted state falls below the
// threshold or the count exceeds H. Both counts land in [1, H+1].
TariIndex tari_index(const ForecastModel& model, std::span<const Step> history,
                     std::span<const double> aux, EngagementState s_t,
                     EngagementState threshold, int H);

// Exactly k distinct arm ids. Ordered ascending for reproducible output.
struct PolicyDecision {
  std::vector<int> arm_ids;
};

// k arms with the largest scores; ties broken uniformly at random. The
// chosen set is invariant to positive affine transforms of the scores.
PolicyDecision select_top_k(const std::vector<double>& scores, int k, Rng& rng);

// Discretized transition model per feature cluster over the expanded state
// space (tuples of the last hw bins, encoded base-n_bins).
class WhittleModel {
 public:
  WhittleModel(Discretizer d, int hw, double gamma, int n_clusters);

  const Discretizer& discretizer() const { return d_; }
  int history_order() const { return hw_; }
  double gamma() const { return gamma_; }
  int n_clusters() const { return n_clusters_; }
  int expanded_size() const { return expanded_size_; }
  const std::vector<std::vector<double>>& centroids() const { return centroids_; }

  // P(next bin | expanded state, action) for one cluster; rows sum to 1.
  double prob(int cluster, int expanded, Action a, int next_bin) const;
  // Reward of occupying an expanded state = indicator at its newest bin's
  // midpoint.
  double state_reward(int expanded) const;
  // Expanded state reached from `expanded` when `next_bin` is observed
  // (oldest bin drops out).
  int successor(int expanded, int next_bin) const;
  // Nearest centroid in feature space (cluster 0 when unclustered).
  int cluster_of(std::span<const double> features) const;
  // Expanded state from the newest hw observed bins, front-padded with the
  // earliest observed bin when the history is shorter than hw.
  int expanded_state_of(std::span<const Step> observed) const;

 private:
  friend WhittleModel estimate_transitions(const std::vector<Trajectory>&, const Discretizer&,
                                           int, int, double, std::uint64_t);

  Discretizer d_;
  int hw_;
  double gamma_;
  int n_clusters_;
  int expanded_size_;
  std::vector<std::vector<double>> centroids_;
  std::vector<double> probs_;  // [cluster][expanded][action][next_bin] flattened
};

// Raised when the subsidy bracket never produces an action-preference sign
// change even after widening; carries the final bracket endpoints.
struct IndexabilityWarning : std::runtime_error {
  IndexabilityWarning(double lo_in, double hi_in);
  double lo;
  double hi;
};

// k-means (Lloyd's) clustering of arm features followed by per-cluster
// empirical transition counts over expanded states. Unseen (state, action)
// rows fall back to the cluster's action-marginal row, then the global
// action-marginal, then uniform.
WhittleModel estimate_transitions(const std::vector<Trajectory>& historical, const Discretizer& d,
                                  int hw, int n_clusters, double gamma, std::uint64_t seed);

// Smallest passive subsidy m making the planner indifferent at the given
// state: value iteration (sup-norm tolerance 1e-9, at most 1e5 sweeps) inside
// a binary search to gap 1e-6, bracket [-10, 10] widened x2 up to 4 times.
double whittle_index(const WhittleModel& wm, int cluster, int expanded_state);

// All (cluster, expanded_state) indices computed once; non-indexable entries
// hold -infinity and are counted in n_warnings.
struct WhittleIndexCache {
  std::vector<double> index;  // [cluster][expanded] flattened
  int n_warnings = 0;

  double at(const WhittleModel& wm, int cluster, int expanded) const;
};

WhittleIndexCache build_whittle_cache(const WhittleModel& wm);

// Scores each arm by its cached index at (cluster of features, expanded
// state of observed history) and picks the top k.
PolicyDecision whittle_select(const WhittleModel& wm, const WhittleIndexCache& cache,
                              const std::vector<std::vector<Step>>& observed,
                              const std::vector<std::vector<double>>& features, int k, Rng& rng);

// Cyclic selection: arms cursor..cursor+k-1 modulo N; advances the cursor.
PolicyDecision round_robin_select(int& cursor, int n_arms, int k);

// Uniform k-subset without replacement.
PolicyDecision random_select(int n_arms, int k, Rng& rng);

// No calls ever; the engine applies the passive action to every arm.
PolicyDecision control_select();

}  // namespace restless

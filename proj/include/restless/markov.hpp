// Markov-order diagnostics: empirical order-h transition counters over
// discretized states and the per-order trajectory log-likelihood comparison
// that quantifies how non-Markovian a dataset is.
#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "restless/core.hpp"

namespace restless {

// Counters keyed by (h-tuple of bins, action) mapping to per-next-bin counts.
struct TransitionCounts {
  int order = 1;
  int n_bins = 2;
  std::unordered_map<std::uint64_t, std::vector<std::int64_t>> table;
  std::int64_t total = 0;

  // Key layout: base-n_bins encoding of the bin tuple, then the action bit.
  static std::uint64_t key_of(const std::vector<int>& bins, Action a, int n_bins);
};

// Counts every transition at positions t >= h: (bins of s_{t-h+1..t}, a_t)
// toward the bin of s_{t+1}. Trajectories shorter than h+1 contribute nothing.
TransitionCounts count_transitions(const std::vector<Trajectory>& trajectories, int h,
                                   const Discretizer& d);

// Normalized next-bin distribution for one key; throws on unseen keys (which
// cannot happen for in-sample queries).
std::vector<double> empirical_probs(const TransitionCounts& counts, std::uint64_t key);

// Fits order-h counts on the given trajectories, then averages the total
// negative log-likelihood (natural log) per trajectory over the trajectories
// that are long enough to contribute transitions.
double mean_negloglik(const std::vector<Trajectory>& trajectories, int h, const Discretizer& d);

struct LikelihoodReport {
  std::vector<int> orders;                        // 1..max_order
  std::vector<double> mean_negloglik;             // l(h), aligned with orders
  std::vector<double> relative_improvement_pct;   // -100 * (l(h) - l(1)) / l(1)
};

// Percent improvement of each l(h) over l(1); exactly 0 at h=1.
std::vector<double> relative_improvement(const std::vector<double>& negloglik);

LikelihoodReport likelihood_report(const std::vector<Trajectory>& trajectories, int max_order,
                                   const Discretizer& d);

void write_likelihood_csv(const std::string& path, const LikelihoodReport& report);

}  // namespace restless

#include "restless/markov.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "restless/csv.hpp"

namespace restless {

std::uint64_t TransitionCounts::key_of(const std::vector<int>& bins, Action a, int n_bins) {
  return encode_bins(bins, n_bins) * 2 + static_cast<std::uint64_t>(action_index(a));
}

TransitionCounts count_transitions(const std::vector<Trajectory>& trajectories, int h,
                                   const Discretizer& d) {
  if (h < 1) throw std::invalid_argument("order h must be >= 1");
  TransitionCounts counts;
  counts.order = h;
  counts.n_bins = d.n_bins();
  for (const auto& traj : trajectories) {
    const auto L = static_cast<std::ptrdiff_t>(traj.steps.size());
    if (L < h + 1) continue;
    std::vector<int> bins(traj.steps.size());
    for (std::size_t i = 0; i < traj.steps.size(); ++i) bins[i] = d.bin_of(traj.steps[i].state);
    // 0-based position i plays the role of timestep t; the window covers
    // states at i-h+1..i and the action taken at i.
    for (std::ptrdiff_t i = h - 1; i + 1 < L; ++i) {
      std::vector<int> window(bins.begin() + i - h + 1, bins.begin() + i + 1);
      const auto key = TransitionCounts::key_of(window, traj.steps[static_cast<std::size_t>(i)].action,
                                                counts.n_bins);
      auto& row = counts.table[key];
      if (row.empty()) row.assign(static_cast<std::size_t>(counts.n_bins), 0);
      ++row[static_cast<std::size_t>(bins[static_cast<std::size_t>(i) + 1])];
      ++counts.total;
    }
  }
  return counts;
}

std::vector<double> empirical_probs(const TransitionCounts& counts, std::uint64_t key) {
  const auto it = counts.table.find(key);
  if (it == counts.table.end()) {
    throw std::out_of_range("empirical_probs: unseen transition key " + std::to_string(key));
  }
  std::int64_t total = 0;
  for (auto c : it->second) total += c;
  std::vector<double> probs(it->second.size());
  for (std::size_t b = 0; b < probs.size(); ++b) {
    probs[b] = static_cast<double>(it->second[b]) / static_cast<double>(total);
  }
  return probs;
}

double mean_negloglik(const std::vector<Trajectory>& trajectories, int h, const Discretizer& d) {
  const auto counts = count_transitions(trajectories, h, d);
  if (counts.total == 0) {
    throw std::invalid_argument("mean_negloglik: no trajectory has at least h+1 steps");
  }
  double sum_over_trajectories = 0.0;
  std::size_t n_contributing = 0;
  for (const auto& traj : trajectories) {
    const auto L = static_cast<std::ptrdiff_t>(traj.steps.size());
    if (L < h + 1) continue;
    std::vector<int> bins(traj.steps.size());
    for (std::size_t i = 0; i < traj.steps.size(); ++i) bins[i] = d.bin_of(traj.steps[i].state);
    double nll = 0.0;
    for (std::ptrdiff_t i = h - 1; i + 1 < L; ++i) {
      std::vector<int> window(bins.begin() + i - h + 1, bins.begin() + i + 1);
      const auto key = TransitionCounts::key_of(window, traj.steps[static_cast<std::size_t>(i)].action,
                                                counts.n_bins);
      const auto probs = empirical_probs(counts, key);
      nll -= std::log(probs[static_cast<std::size_t>(bins[static_cast<std::size_t>(i) + 1])]);
    }
    sum_over_trajectories += nll;
    ++n_contributing;
  }
  return sum_over_trajectories / static_cast<double>(n_contributing);
}

std::vector<double> relative_improvement(const std::vector<double>& negloglik) {
  if (negloglik.empty()) throw std::invalid_argument("relative_improvement: empty input");
  const double base = negloglik.front();
  if (!(base > 0.0)) {
    throw std::invalid_argument(
        "relative_improvement: l(1) must be > 0 (deterministic data has no headroom)");
  }
  std::vector<double> pct(negloglik.size());
  pct[0] = 0.0;  // exact by definition
  for (std::size_t i = 1; i < negloglik.size(); ++i) {
    pct[i] = -100.0 * (negloglik[i] - base) / base;
  }
  return pct;
}

LikelihoodReport likelihood_report(const std::vector<Trajectory>& trajectories, int max_order,
                                   const Discretizer& d) {
  if (max_order < 1) throw std::invalid_argument("max_order must be >= 1");
  LikelihoodReport report;
  for (int h = 1; h <= max_order; ++h) {
    report.orders.push_back(h);
    report.mean_negloglik.push_back(mean_negloglik(trajectories, h, d));
  }
  report.relative_improvement_pct = relative_improvement(report.mean_negloglik);
  return report;
}

void write_likelihood_csv(const std::string& path, const LikelihoodReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "h,mean_negloglik,relative_improvement_pct\n";
  for (std::size_t i = 0; i < report.orders.size(); ++i) {
    out << report.orders[i] << ',' << format_double(report.mean_negloglik[i]) << ','
        << format_double(report.relative_improvement_pct[i]) << '\n';
  }
}

}  // namespace restless

#include "restless/core.hpp"

#include <cmath>
#include <stdexcept>

namespace restless {

EngagementState::EngagementState(double v) : value_(v) {
  // The negated comparison also rejects NaN.
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::out_of_range("engagement state outside [0,1]: " + std::to_string(v));
  }
}

EngagementState EngagementState::clamped(double v) {
  if (std::isnan(v)) throw std::out_of_range("engagement state is NaN");
  if (v < 0.0) v = 0.0;
  if (v > 1.0) v = 1.0;
  return EngagementState(v);
}

ProblemInstance::ProblemInstance(int n_arms_in, int budget_in, int horizon_in,
                                 EngagementState threshold_in)
    : n_arms(n_arms_in), budget(budget_in), horizon(horizon_in), threshold(threshold_in) {
  if (n_arms < 1) throw std::invalid_argument("instance needs at least one arm");
  if (budget < 1 || budget > n_arms) {
    throw std::invalid_argument("budget must satisfy 1 <= k <= n_arms (got k=" +
                                std::to_string(budget) + ", N=" + std::to_string(n_arms) + ")");
  }
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
}

Discretizer::Discretizer(int n_bins, EngagementState threshold)
    : n_bins_(n_bins), threshold_(threshold) {
  if (n_bins < 2) throw std::invalid_argument("discretizer needs at least 2 bins");
}

int Discretizer::bin_of(EngagementState s) const {
  if (n_bins_ == 2) {
    // Binary case splits at the engagement threshold, not at 0.5.
    return s.value() < threshold_.value() ? 0 : 1;
  }
  const int bin = static_cast<int>(std::floor(s.value() * n_bins_));
  return bin >= n_bins_ ? n_bins_ - 1 : bin;  // state 1.0 lands in the top bin
}

EngagementState Discretizer::midpoint(int bin) const {
  if (bin < 0 || bin >= n_bins_) throw std::out_of_range("bin index out of range");
  if (n_bins_ == 2) {
    const double thr = threshold_.value();
    return EngagementState(bin == 0 ? thr / 2.0 : (thr + 1.0) / 2.0);
  }
  return EngagementState((bin + 0.5) / n_bins_);
}

int reward(EngagementState state, EngagementState threshold) {
  return state.value() >= threshold.value() ? 1 : 0;
}

int discretize(EngagementState state, const Discretizer& d) { return d.bin_of(state); }

int budget_from_fraction(int n_arms, double fraction) {
  if (n_arms < 1) throw std::invalid_argument("budget_from_fraction: n_arms must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("budget_from_fraction: fraction must be in (0, 1]");
  }
  const int k = static_cast<int>(std::floor(fraction * n_arms));
  return k < 1 ? 1 : k;
}

std::uint64_t encode_bins(const std::vector<int>& bins, int n_bins) {
  std::uint64_t key = 0;
  for (int b : bins) {
    if (b < 0 || b >= n_bins) throw std::out_of_range("bin index out of range in encode_bins");
    key = key * static_cast<std::uint64_t>(n_bins) + static_cast<std::uint64_t>(b);
  }
  return key;
}

}  // namespace restless

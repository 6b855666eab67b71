// Domain types shared by every other module: engagement states, actions,
// trajectories, problem instances, discretization, and the reward function.
#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace restless {

// Normalized engagement level in [0,1] (1.0 = listened to the full message).
// Constructing from out-of-range input throws; use clamped() for dynamics
// code where saturation at the boundaries is the intended behavior.
class EngagementState {
 public:
  EngagementState() = default;
  explicit EngagementState(double v);

  // Saturates v into [0,1]; NaN is still rejected.
  static EngagementState clamped(double v);

  double value() const { return value_; }
  auto operator<=>(const EngagementState&) const = default;

 private:
  double value_ = 0.0;
};

enum class Action : std::uint8_t { passive = 0, active = 1 };

inline int action_index(Action a) { return a == Action::active ? 1 : 0; }

// One observed timestep of an arm.
struct Step {
  EngagementState state;
  Action action = Action::passive;

  bool operator==(const Step&) const = default;
};

// Per-arm time series of steps plus optional static covariates. Step index 0
// corresponds to week 1; weeks are consecutive with no gaps.
struct Trajectory {
  int arm_id = 0;
  std::vector<Step> steps;
  std::vector<double> features;  // empty = no covariates

  std::size_t length() const { return steps.size(); }
};

// One planning problem: N arms, per-step budget k, horizon H, threshold s*.
struct ProblemInstance {
  ProblemInstance(int n_arms, int budget, int horizon, EngagementState threshold);

  int n_arms = 0;
  int budget = 0;
  int horizon = 0;
  EngagementState threshold;
};

// Maps continuous states to bin indices. Two bins split at the engagement
// threshold (non-engaging / engaging); more bins are equal-width over [0,1].
class Discretizer {
 public:
  Discretizer(int n_bins, EngagementState threshold);

  int n_bins() const { return n_bins_; }
  double threshold() const { return threshold_.value(); }

  int bin_of(EngagementState s) const;
  // Representative state for a bin; bin_of(midpoint(b)) == b for all b.
  EngagementState midpoint(int bin) const;

 private:
  int n_bins_;
  EngagementState threshold_;
};

// Indicator reward: 1 iff the arm is engaging (state >= threshold).
int reward(EngagementState state, EngagementState threshold);

int discretize(EngagementState state, const Discretizer& d);

// Budget from a population fraction, floored with a minimum of one call.
int budget_from_fraction(int n_arms, double fraction);

// Packs a sequence of bin indices into a single base-n_bins integer key
// (first element is the most significant digit). Used for expanded states.
std::uint64_t encode_bins(const std::vector<int>& bins, int n_bins);

}  // namespace restless

// Synthetic agent populations: habit-forming, motivation-based, and random
// agents with ground-truth dynamics, plus historical-trajectory generation
// under a randomized call schedule.
#pragma once

#include <cstdint>
#include <vector>

#include "restless/core.hpp"
#include "restless/rng.hpp"

namespace restless {

enum class AgentKind : int { habit_former = 0, motivation_based = 1, random_agent = 2 };

// Populations are drawn in equal thirds by cycling kinds over arm ids.
AgentKind kind_of_arm(int arm_id);

// Train-mode agents parameterize the historical data used to fit models;
// test-mode agents have faster drop rates and drive evaluation episodes.
enum class GenMode { train, test };

// "x +/- U(y)" in the agent definitions is ambiguous; default reading is an
// additive magnitude U(0,y) whose sign is a fair coin flip, the alternative
// is a symmetric draw from [-y, y].
enum class PerturbKind { signed_magnitude, symmetric_interval };

// Immutable per-agent parameters, drawn once at creation.
struct AgentSpec {
  AgentKind kind = AgentKind::random_agent;
  double drop_rate = 0.01;      // state loss per passive step (HF, MB)
  double increase_rate = 0.0;   // active step multiplies state by 1+rate (HF)
  double baseline = 0.0;        // active step returns state here (MB)
  int habit_duration = 0;       // steps pinned at 1.0 once a habit forms (HF)
  EngagementState start_state;
  double feature = 0.0;         // noisy scalar indicator of the kind
  std::uint64_t rng_seed = 0;   // stream for the agent's own stochasticity
};

// Mutable simulation state. habit_timer > 0 implies current == 1.0.
struct AgentState {
  EngagementState current;
  int habit_timer = 0;
};

AgentSpec sample_agent(AgentKind kind, GenMode mode, Rng& rng,
                       PerturbKind perturb = PerturbKind::signed_magnitude);

AgentState initial_state(const AgentSpec& spec);

// Advances one agent one step under the given action. Only random agents
// consume rng draws, so call counts stay aligned across action sequences.
AgentState step_agent(const AgentSpec& spec, const AgentState& st, Action action, Rng& rng);

// 3 * n_per_kind agents with kinds cycling by arm id and parameters drawn
// from per-arm streams derived from seed; bit-reproducible.
std::vector<AgentSpec> sample_population(int n_per_kind, GenMode mode, std::uint64_t seed,
                                         PerturbKind perturb = PerturbKind::signed_magnitude);

// Rolls every agent under the historical policy: act i times (i ~ U{6..24}),
// every j steps (j ~ U{1..14}), i.e. active at t = j, 2j, ..., ij capped at
// the trajectory length. Attaches the noisy kind feature to each trajectory.
std::vector<Trajectory> generate_historical_dataset(
    int n_per_kind, int length, GenMode mode, std::uint64_t seed,
    PerturbKind perturb = PerturbKind::signed_magnitude);

// Rolls one agent under a fixed action sequence from its start state.
Trajectory rollout_agent(const AgentSpec& spec, int arm_id, const std::vector<Action>& actions);

}  // namespace restless

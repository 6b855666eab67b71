#include "restless/synthgen.hpp"

#include <algorithm>
#include <stdexcept>

namespace restless {
namespace {

// Stream labels so each purpose gets an independent substream per arm.
constexpr std::uint64_t kParamStream = 0x5a;
constexpr std::uint64_t kDynamicsStream = 0xd1;
constexpr std::uint64_t kScheduleStream = 0x5c;

double perturbed(double base, double magnitude, Rng& rng, PerturbKind perturb) {
  if (perturb == PerturbKind::symmetric_interval) {
    return base + rng.uniform(-magnitude, magnitude);
  }
  const double u = rng.uniform(0.0, magnitude);
  return rng.coin_flip() ? base - u : base + u;
}

constexpr double kMinDropRate = 0.01;

}  // namespace

AgentKind kind_of_arm(int arm_id) { return static_cast<AgentKind>(arm_id % 3); }

AgentSpec sample_agent(AgentKind kind, GenMode mode, Rng& rng, PerturbKind perturb) {
  AgentSpec spec;
  spec.kind = kind;
  switch (kind) {
    case AgentKind::habit_former:
      spec.start_state = EngagementState::clamped(perturbed(0.75, 0.2, rng, perturb));
      if (mode == GenMode::train) {
        spec.drop_rate = std::max(kMinDropRate, perturbed(0.03, 0.03, rng, perturb));
        spec.increase_rate = 0.2 + rng.uniform(0.0, 0.2);
      } else {
        spec.drop_rate = std::max(kMinDropRate, perturbed(0.1, 0.05, rng, perturb));
        spec.increase_rate = 0.2 + rng.uniform(0.0, 0.1);
      }
      spec.habit_duration = static_cast<int>(rng.uniform_int(8, 12));
      break;
    case AgentKind::motivation_based:
      spec.start_state = EngagementState::clamped(1.0 - rng.uniform(0.0, 0.2));
      spec.baseline = spec.start_state.value();  // a call restores the start state
      if (mode == GenMode::train) {
        spec.drop_rate = std::max(kMinDropRate, perturbed(0.05, 0.05, rng, perturb));
      } else {
        spec.drop_rate = std::max(kMinDropRate, perturbed(0.1, 0.05, rng, perturb));
      }
      break;
    case AgentKind::random_agent:
      // Dynamics parameters are unused; the state is redrawn every step.
      spec.start_state = EngagementState(rng.uniform01());
      break;
  }
  spec.feature = static_cast<double>(kind) + 0.1 * rng.gaussian();
  return spec;
}

AgentState initial_state(const AgentSpec& spec) { return AgentState{spec.start_state, 0}; }

AgentState step_agent(const AgentSpec& spec, const AgentState& st, Action action, Rng& rng) {
  switch (spec.kind) {
    case AgentKind::habit_former: {
      if (st.habit_timer > 0) {
        // Habit in progress: pinned at 1.0 regardless of the action.
        return AgentState{EngagementState(1.0), st.habit_timer - 1};
      }
      const double s = st.current.value();
      const double next =
          action == Action::active ? (1.0 + spec.increase_rate) * s : s - spec.drop_rate;
      if (next >= 1.0) {
        // Habit formed: stays at 1.0 for habit_duration further steps.
        return AgentState{EngagementState(1.0), spec.habit_duration};
      }
      return AgentState{EngagementState::clamped(next), 0};
    }
    case AgentKind::motivation_based: {
      if (action == Action::active) return AgentState{EngagementState(spec.baseline), 0};
      return AgentState{EngagementState::clamped(st.current.value() - spec.drop_rate), 0};
    }
    case AgentKind::random_agent:
      return AgentState{EngagementState(rng.uniform01()), 0};
  }
  throw std::logic_error("unreachable agent kind");
}

std::vector<AgentSpec> sample_population(int n_per_kind, GenMode mode, std::uint64_t seed,
                                         PerturbKind perturb) {
  if (n_per_kind < 1) throw std::invalid_argument("n_per_kind must be >= 1");
  std::vector<AgentSpec> specs;
  specs.reserve(static_cast<std::size_t>(3 * n_per_kind));
  for (int arm = 0; arm < 3 * n_per_kind; ++arm) {
    Rng param_rng(derive_seed(seed, static_cast<std::uint64_t>(arm), kParamStream));
    AgentSpec spec = sample_agent(kind_of_arm(arm), mode, param_rng, perturb);
    spec.rng_seed = derive_seed(seed, static_cast<std::uint64_t>(arm), kDynamicsStream);
    specs.push_back(spec);
  }
  return specs;
}

Trajectory rollout_agent(const AgentSpec& spec, int arm_id, const std::vector<Action>& actions) {
  Rng dynamics_rng(spec.rng_seed);
  Trajectory traj;
  traj.arm_id = arm_id;
  traj.features = {spec.feature};
  traj.steps.reserve(actions.size());
  AgentState st = initial_state(spec);
  for (Action a : actions) {
    traj.steps.push_back(Step{st.current, a});
    st = step_agent(spec, st, a, dynamics_rng);
  }
  return traj;
}

std::vector<Trajectory> generate_historical_dataset(int n_per_kind, int length, GenMode mode,
                                                    std::uint64_t seed, PerturbKind perturb) {
  if (length < 1) throw std::invalid_argument("trajectory length must be >= 1");
  const auto specs = sample_population(n_per_kind, mode, seed, perturb);
  std::vector<Trajectory> dataset;
  dataset.reserve(specs.size());
  for (int arm = 0; arm < static_cast<int>(specs.size()); ++arm) {
    Rng schedule_rng(derive_seed(seed, static_cast<std::uint64_t>(arm), kScheduleStream));
    const auto i = schedule_rng.uniform_int(6, 24);   // number of calls
    const auto j = schedule_rng.uniform_int(1, 14);   // call spacing
    std::vector<Action> actions(static_cast<std::size_t>(length), Action::passive);
    for (std::int64_t call = 1; call <= i; ++call) {
      const std::int64_t t = call * j;  // 1-based timestep of the call
      if (t > length) break;
      actions[static_cast<std::size_t>(t - 1)] = Action::active;
    }
    dataset.push_back(rollout_agent(specs[static_cast<std::size_t>(arm)], arm, actions));
  }
  return dataset;
}

}  // namespace restless

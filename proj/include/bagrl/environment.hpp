#pragma once

#include <concepts>
#include <vector>

#include "bagrl/task_mdp.hpp"

namespace bagrl {

struct StepResult {
  Observation observation;
  StateId state = StateId::S0;
  bool terminal = false;
};

/// Stepping contract shared by the bag simulator and test doubles.
/// `action_space()` lists the affordable pairs for the current state.
template <class E>
concept Environment = requires(E& env, const E& cenv, const ActionPair& action, StageId stage) {
  { env.reset(stage) } -> std::convertible_to<Observation>;
  { env.step(action) } -> std::same_as<StepResult>;
  { cenv.state() } -> std::same_as<StateId>;
  { cenv.observation() } -> std::convertible_to<const Observation&>;
  { cenv.params() } -> std::convertible_to<const BagParams&>;
  { cenv.action_space() } -> std::same_as<std::vector<ActionPair>>;
  { cenv.action_space_for(StateId{}, Observation{}) } -> std::same_as<std::vector<ActionPair>>;
  { cenv.center_radius_fraction() } -> std::convertible_to<double>;
};

/// Reward for the transition that produced `result`, per the environment's bag.
template <Environment Env>
double transition_reward(const Env& env, const StepResult& result) {
  const bool at_center = object_at_center(result.observation, env.center_radius_fraction());
  return reward(result.state, result.observation, env.params(), at_center);
}

}  // namespace bagrl

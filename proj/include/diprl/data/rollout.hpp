#pragma once

#include <functional>
#include <vector>

#include "diprl/data/demo_dataset.hpp"
#include "diprl/env/expert.hpp"

namespace diprl::data {

/// Runs one episode from a fresh reset of `cfg`, choosing actions with
/// `policy`, and returns the transitions tagged with `source`.
template <class Policy>
std::vector<Transition> rollout_episode(const env::EnvConfig& cfg, Policy&& policy, Source source,
                                        int* logs_out = nullptr) {
  auto [state, obs] = env::reset(cfg);
  std::vector<Transition> out;
  bool done = false;
  while (!done) {
    const env::Action a = policy(static_cast<const env::WorldState&>(state), static_cast<const Observation&>(obs));
    auto r = env::step(state, a);
    done = r.done;
    out.emplace_back(std::move(obs), a, r.observation, r.done, r.hidden_reward, source);
    state = std::move(r.state);
    obs = std::move(r.observation);
  }
  if (logs_out) *logs_out = state.logs_collected;
  return out;
}

/// n expert episodes on the configured world.
inline DemoDataset generate_expert_demos(const env::EnvConfig& cfg, int n_episodes,
                                         std::vector<int>* logs_per_episode = nullptr) {
  if (n_episodes < 1) throw ConfigError("need at least one demonstration episode");
  DemoDataset demos;
  for (int i = 0; i < n_episodes; ++i) {
    int logs = 0;
    demos.add_episode(rollout_episode(
        cfg, [](const env::WorldState& s, const Observation&) { return env::scripted_expert(s); }, Source::demo,
        &logs));
    if (logs_per_episode) logs_per_episode->push_back(logs);
  }
  return demos;
}

}  // namespace diprl::data

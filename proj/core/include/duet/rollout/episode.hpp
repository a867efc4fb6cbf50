#pragma once

#include <functional>

#include "duet/policy/policy.hpp"
#include "duet/rollout/trajectory.hpp"

namespace duet::rollout {

// Scores a finished trajectory (typically by replay-based verification).
// Must be pure and thread-safe: group sampling calls it from workers.
using RewardFn = std::function<double(const Trajectory&)>;

struct EpisodeOptions {
  uint64_t seed = 0;
  // Hard cap on recorded turns (tool calls included); hitting it
  // terminates the episode with reason "max_turns".
  int max_records = 40;
  // Optional scorer, applied to every non-"error" termination. Errored
  // episodes keep reward 0 without consulting it.
  RewardFn scorer;
};

struct EpisodeResult {
  Trajectory trajectory;
  env::EnvState final_state;
};

// Drives one full episode: the user opens, messages alternate the floor,
// tool calls keep it. A policy output that fails its role's grammar is
// demoted to a plain message carrying the raw text (the counterpart sees
// the garbled output; the episode goes on). ScriptExhausted and
// RemoteUnavailable from a policy end the episode with termination
// "error"; everything else propagates.
//
// Each policy draws randomness from its own stream forked from
// options.seed, so episodes are bit-reproducible given (task, policies,
// seed) and independent of any outer sampling order.
EpisodeResult run_episode(const env::Environment& environment, const env::TaskSpec& task,
                          policy::Policy& agent, policy::Policy& user,
                          const EpisodeOptions& options);

}  // namespace duet::rollout

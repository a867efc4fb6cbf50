#pragma once

#include <optional>
#include <string>
#include <vector>

#include "duet/env/env.hpp"
#include "duet/policy/parse.hpp"

namespace duet::rollout {

// One act() call by either party. Tool-call turns embed the result the
// caller observed; message turns do not. Token ids / log-probabilities are
// present only for locally sampled differentiable policies — turns from
// scripted or remote policies carry none and contribute no optimizable
// tokens downstream.
struct TurnRecord {
  int index = 0;                  // position within the trajectory
  env::Role actor = env::Role::user;
  std::string raw;                // surface form exactly as produced
  policy::ParsedAction parsed;    // parse of `raw` (may be !ok)
  std::optional<env::ToolResult> tool_result;
  std::vector<int> token_ids;
  std::vector<double> token_logprobs;

  size_t token_count() const { return token_ids.size(); }

  json to_json() const;
  static TurnRecord from_json(const json& j);
};

// What the acting party effectively did: the parsed payload, or — for
// output that failed the grammar — a plain message carrying the raw text,
// which is exactly what the live episode driver submits in that case.
// Replays must use this too, so live runs and replays stay step-aligned.
env::ActionPayload effective_payload(const TurnRecord& turn);

// A full episode: every turn by both parties, in order. Deliberately does
// NOT store the final environment state — anyone who needs it replays the
// turns, so a hand-edited record cannot smuggle in a flattering state.
struct Trajectory {
  std::string task_id;
  uint64_t seed = 0;
  std::vector<TurnRecord> turns;
  // "stop" | "transfer" | "out_of_scope" (user-signalled), "max_turns"
  // (record cap), "error" (a policy failed mid-episode).
  std::string termination;
  double reward = 0.0;

  size_t agent_token_total() const;

  json to_json() const;
  static Trajectory from_json(const json& j);
};

// JSONL persistence (one trajectory per line).
void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories);
std::vector<Trajectory> load_trajectories(const std::string& path);

// Deterministic replay of a trajectory through a fresh environment,
// re-executing every recorded tool call instead of trusting the recorded
// results. Captures, for every tool call, the entities snapshot the call
// ran against and what the tool actually returned — the raw material for
// verification. Throws ProtocolViolation when the recorded turns cannot
// have happened (acting out of turn, acting after termination), which
// verifiers treat as an automatic failure.
struct ReplayStep {
  int turn_index = 0;
  env::Role actor = env::Role::user;
  env::ToolCall call;
  env::ToolResult executed;
  json pre_call_entities;
};

struct Replay {
  env::EnvState final_state;
  std::vector<ReplayStep> tool_steps;
};

Replay replay_trajectory(const env::Environment& environment, const env::TaskSpec& task,
                         const Trajectory& trajectory);

}  // namespace duet::rollout

#pragma once

#include "duet/rollout/trajectory.hpp"

namespace duet::rollout {

struct SftOptions {
  // Keep only trajectories whose reward reaches this bar (the default
  // keeps exactly the verified-successful ones).
  double min_reward = 1.0;
  // Drop individual agent turns whose output failed the grammar even when
  // the episode as a whole succeeded.
  bool skip_malformed_turns = true;
  std::string extra_system;  // prepended guidance, if any
};

// Turns verified episodes into supervised fine-tuning rows: one row per
// agent turn, pairing the chat-rendered context the agent saw with the raw
// tagged output it produced. Contexts are rebuilt by replaying the episode
// through the environment, so rows reflect what actually happened rather
// than what the record claims.
//
// Row shape: {"task_id", "seed", "turn_index", "messages": [...],
//             "completion": "..."}.
std::vector<json> export_sft(const env::Environment& environment, const env::TaskSpec& task,
                             const std::vector<Trajectory>& trajectories,
                             const SftOptions& options = {});

void write_sft_file(const std::string& path, const std::vector<json>& rows);

}  // namespace duet::rollout

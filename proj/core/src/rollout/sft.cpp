#include "duet/rollout/sft.hpp"

#include "duet/jsonl.hpp"
#include "duet/policy/parse.hpp"

namespace duet::rollout {

std::vector<json> export_sft(const env::Environment& environment, const env::TaskSpec& task,
                             const std::vector<Trajectory>& trajectories,
                             const SftOptions& options) {
  std::vector<json> rows;
  for (const Trajectory& trajectory : trajectories) {
    if (trajectory.reward < options.min_reward) continue;
    if (trajectory.task_id != task.id) {
      throw BadConfig("export_sft: trajectory " + trajectory.task_id +
                      " does not belong to task " + task.id);
    }
    env::EnvState state = environment.reset(task);
    for (const TurnRecord& turn : trajectory.turns) {
      if (turn.actor == env::Role::agent &&
          !(options.skip_malformed_turns && !turn.parsed.ok)) {
        rows.push_back(json{
            {"task_id", trajectory.task_id},
            {"seed", trajectory.seed},
            {"turn_index", turn.index},
            {"messages", policy::render_chat_messages(
                             environment.observe(state, env::Role::agent),
                             options.extra_system)},
            {"completion", turn.raw}});
      }
      state = environment
                  .apply(state, env::JointAction::by(turn.actor, effective_payload(turn)))
                  .state;
    }
  }
  return rows;
}

void write_sft_file(const std::string& path, const std::vector<json>& rows) {
  write_jsonl_file(path, rows);
}

}  // namespace duet::rollout

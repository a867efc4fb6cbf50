#include "duet/rollout/episode.hpp"

#include "duet/errors.hpp"

namespace duet::rollout {

EpisodeResult run_episode(const env::Environment& environment, const env::TaskSpec& task,
                          policy::Policy& agent, policy::Policy& user,
                          const EpisodeOptions& options) {
  if (agent.role() != env::Role::agent || user.role() != env::Role::user) {
    throw BadConfig("run_episode: policies must match their seats");
  }

  EpisodeResult result;
  result.trajectory.task_id = task.id;
  result.trajectory.seed = options.seed;

  Rng agent_rng(hash_mix(options.seed, "agent"));
  Rng user_rng(hash_mix(options.seed, "user"));

  env::EnvState state = environment.reset(task);
  while (!state.terminated()) {
    if (static_cast<int>(result.trajectory.turns.size()) >= options.max_records) {
      result.trajectory.termination = "max_turns";
      break;
    }
    const env::Role actor = state.next_speaker();
    const bool is_agent = actor == env::Role::agent;
    policy::Policy& seat = is_agent ? agent : user;
    Rng& rng = is_agent ? agent_rng : user_rng;

    policy::PolicyOutput out;
    try {
      out = seat.act(environment.observe(state, actor), rng);
    } catch (const ScriptExhausted&) {
      result.trajectory.termination = "error";
      break;
    } catch (const RemoteUnavailable&) {
      result.trajectory.termination = "error";
      break;
    }

    TurnRecord turn;
    turn.index = static_cast<int>(result.trajectory.turns.size());
    turn.actor = actor;
    turn.raw = out.raw;
    turn.parsed = out.parsed;
    turn.token_ids = std::move(out.token_ids);
    turn.token_logprobs = std::move(out.token_logprobs);

    auto step = environment.apply(state, env::JointAction::by(actor, effective_payload(turn)));
    turn.tool_result = std::move(step.tool_result);
    state = std::move(step.state);
    result.trajectory.turns.push_back(std::move(turn));
  }

  if (state.terminated()) result.trajectory.termination = state.termination_reason();
  result.final_state = std::move(state);

  if (result.trajectory.termination != "error" && options.scorer) {
    result.trajectory.reward = options.scorer(result.trajectory);
  }
  return result;
}

}  // namespace duet::rollout

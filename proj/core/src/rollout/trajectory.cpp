#include "duet/rollout/trajectory.hpp"

#include "duet/errors.hpp"
#include "duet/jsonl.hpp"

namespace duet::rollout {

json TurnRecord::to_json() const {
  json j{{"index", index},
         {"actor", env::role_name(actor)},
         {"raw", raw},
         {"parsed", parsed.to_json()},
         {"token_ids", token_ids},
         {"token_logprobs", token_logprobs}};
  if (tool_result) j["tool_result"] = tool_result->to_json();
  return j;
}

TurnRecord TurnRecord::from_json(const json& j) {
  TurnRecord t;
  t.index = j.value("index", 0);
  t.actor = env::role_from_name(require_string<IoError>(j, "actor", "turn record"));
  t.raw = j.value("raw", std::string());
  t.parsed = policy::ParsedAction::from_json(require_field<IoError>(j, "parsed", "turn record"));
  if (j.contains("tool_result") && !j["tool_result"].is_null()) {
    t.tool_result = env::ToolResult::from_json(j["tool_result"]);
  }
  t.token_ids = j.value("token_ids", std::vector<int>{});
  t.token_logprobs = j.value("token_logprobs", std::vector<double>{});
  return t;
}

env::ActionPayload effective_payload(const TurnRecord& turn) {
  if (turn.parsed.ok) return turn.parsed.payload;
  return env::Message{turn.raw, env::ControlSignal::none};
}

size_t Trajectory::agent_token_total() const {
  size_t n = 0;
  for (const TurnRecord& t : turns) {
    if (t.actor == env::Role::agent) n += t.token_count();
  }
  return n;
}

json Trajectory::to_json() const {
  json turns_json = json::array();
  for (const TurnRecord& t : turns) turns_json.push_back(t.to_json());
  return json{{"task_id", task_id},
              {"seed", seed},
              {"turns", std::move(turns_json)},
              {"termination", termination},
              {"reward", reward}};
}

Trajectory Trajectory::from_json(const json& j) {
  Trajectory t;
  t.task_id = require_string<IoError>(j, "task_id", "trajectory");
  t.seed = j.value("seed", uint64_t{0});
  for (const json& turn : require_field<IoError>(j, "turns", "trajectory")) {
    t.turns.push_back(TurnRecord::from_json(turn));
  }
  t.termination = j.value("termination", std::string());
  t.reward = j.value("reward", 0.0);
  return t;
}

void save_trajectories(const std::string& path, const std::vector<Trajectory>& trajectories) {
  std::vector<json> lines;
  lines.reserve(trajectories.size());
  for (const Trajectory& t : trajectories) lines.push_back(t.to_json());
  write_jsonl_file(path, lines);
}

std::vector<Trajectory> load_trajectories(const std::string& path) {
  std::vector<Trajectory> out;
  for (const json& line : read_jsonl_file(path)) out.push_back(Trajectory::from_json(line));
  return out;
}

Replay replay_trajectory(const env::Environment& environment, const env::TaskSpec& task,
                         const Trajectory& trajectory) {
  Replay replay;
  env::EnvState state = environment.reset(task);
  for (const TurnRecord& turn : trajectory.turns) {
    env::ActionPayload payload = effective_payload(turn);
    json pre_entities;
    const bool is_call = std::holds_alternative<env::ToolCall>(payload);
    if (is_call) pre_entities = state.entities;
    auto step = environment.apply(state, env::JointAction::by(turn.actor, payload));
    if (is_call) {
      replay.tool_steps.push_back(ReplayStep{turn.index, turn.actor,
                                             std::get<env::ToolCall>(payload),
                                             std::move(*step.tool_result),
                                             std::move(pre_entities)});
    }
    state = std::move(step.state);
  }
  replay.final_state = std::move(state);
  return replay;
}

}  // namespace duet::rollout

#include "duet/env/env.hpp"

#include "semantics.hpp"

namespace duet::env {

namespace {

std::string compose_user_context(const TaskSpec& task) {
  std::string out;
  if (!task.context.empty()) out += "Context: " + task.context + "\n";
  if (!task.purpose.empty()) out += "Purpose: " + task.purpose + "\n";
  if (!task.reason_for_call.empty()) {
    out += "Reason for call: " + task.reason_for_call + "\n";
  }
  if (!task.known_info.empty()) out += "Known info: " + task.known_info + "\n";
  if (!task.task_instructions.empty()) {
    out += "Instructions: " + task.task_instructions + "\n";
  }
  return out;
}

json make_meta(const Domain& domain, uint64_t seed, const std::string& task_id,
               const std::string& user_context) {
  return json{{"turn", 0},
              {"next_speaker", "user"},
              {"terminated", false},
              {"termination_reason", ""},
              {"now", domain.now()},
              {"seed", seed},
              {"task_id", task_id},
              {"history", json::array()},
              {"task_context",
               {{"agent", domain.agent_guidelines()}, {"user", user_context}}}};
}

}  // namespace

EnvState Environment::reset(const TaskSpec& task) const {
  EnvState s;
  s.entities = domain_.initial_entities();
  s.interaction_meta =
      make_meta(domain_, task.initial_state_seed, task.id, compose_user_context(task));
  return s;
}

EnvState Environment::reset_seed(uint64_t seed) const {
  EnvState s;
  s.entities = domain_.initial_entities();
  s.interaction_meta = make_meta(domain_, seed, "", "");
  return s;
}

std::pair<EnvState, ToolResult> Environment::execute_tool(
    const EnvState& state, Role caller, const ToolCall& call) const {
  const ToolSchema& schema = domain_.tool(call.name);  // throws UnknownTool
  if (!role_allowed(schema.allowed, caller)) {
    throw PermissionDenied(std::string(role_name(caller)) +
                           " may not call tool '" + call.name + "'");
  }
  validate_args(schema, call.arguments);  // throws SchemaViolation

  EnvState next = state;
  const std::string now = state.interaction_meta.value("now", domain_.now());
  ToolResult result =
      detail::airline_execute(domain_, next.entities, now, call);
  return {std::move(next), std::move(result)};
}

StepResult Environment::apply(const EnvState& state,
                              const JointAction& action) const {
  if (state.terminated()) {
    throw ProtocolViolation("cannot act: episode already terminated");
  }
  const Role actor = action.acting_role();  // throws on malformed joints
  if (actor != state.next_speaker()) {
    throw ProtocolViolation(std::string("out of turn: ") + role_name(actor) +
                            " acted but it is the other party's turn");
  }

  const ActionPayload& payload = action.acting_payload();

  if (const Message* msg = std::get_if<Message>(&payload)) {
    StepResult out{state, std::nullopt};
    json& meta = out.state.interaction_meta;
    meta["history"].push_back(json{{"actor", role_name(actor)},
                                   {"kind", "message"},
                                   {"text", msg->text},
                                   {"signal", signal_name(msg->signal)}});
    meta["turn"] = state.turn() + 1;
    meta["next_speaker"] = role_name(other(actor));
    if (msg->signal != ControlSignal::none) {
      meta["terminated"] = true;
      meta["termination_reason"] = signal_name(msg->signal);
    }
    return out;
  }

  const ToolCall& call = std::get<ToolCall>(payload);
  StepResult out{state, std::nullopt};
  ToolResult result;
  try {
    auto [next, res] = execute_tool(state, actor, call);
    out.state = std::move(next);
    result = std::move(res);
  } catch (const PolicyRejection& e) {
    // Contract violations become observable results rather than crashes:
    // the acting party sees a machine-readable rejection and the episode
    // goes on. State is untouched.
    result = ToolResult{call.name, "rejected",
                        json{{"error_type", "policy_rejection"},
                             {"rule_id", e.rule_id()},
                             {"message", e.what()}}};
  } catch (const UnknownTool& e) {
    result = ToolResult{call.name, "rejected",
                        json{{"error_type", "unknown_tool"}, {"message", e.what()}}};
  } catch (const SchemaViolation& e) {
    result = ToolResult{call.name, "rejected",
                        json{{"error_type", "schema_violation"}, {"message", e.what()}}};
  } catch (const PermissionDenied& e) {
    result = ToolResult{call.name, "rejected",
                        json{{"error_type", "permission_denied"}, {"message", e.what()}}};
  }

  json& meta = out.state.interaction_meta;
  meta["history"].push_back(json{{"actor", role_name(actor)},
                                 {"kind", "tool_call"},
                                 {"name", call.name},
                                 {"arguments", call.arguments}});
  meta["history"].push_back(json{{"actor", role_name(actor)},
                                 {"kind", "tool_result"},
                                 {"tool", result.tool},
                                 {"status", result.status},
                                 {"payload", result.payload}});
  // The caller keeps the floor after a tool call, and tool traffic does
  // not advance the alternation turn counter.
  out.tool_result = std::move(result);
  return out;
}

Observation Environment::observe(const EnvState& state, Role role) const {
  Observation obs;
  obs.role = role;
  obs.turn = state.turn();
  obs.terminated = state.terminated();
  obs.task_context =
      state.interaction_meta["task_context"].value(role_name(role), "");
  obs.tool_schemas = domain_.tool_schemas_json(role);
  obs.visible_history = json::array();
  for (const json& ev : state.history()) {
    const std::string kind = ev.value("kind", "");
    if (kind == "message") {
      obs.visible_history.push_back(ev);
    } else if (ev.value("actor", "") == role_name(role)) {
      // Tool traffic is private to the party that produced it.
      obs.visible_history.push_back(ev);
    }
  }
  return obs;
}

}  // namespace duet::env

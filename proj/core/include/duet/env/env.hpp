#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "duet/env/action.hpp"
#include "duet/env/domain.hpp"
#include "duet/env/state.hpp"
#include "duet/env/task.hpp"
#include "duet/env/tools.hpp"

namespace duet::env {

// What one party can see: its own tool traffic, both parties' messages,
// the tools it may call, and its role-local task context. Think spans are
// never part of the state, so they can never leak across parties.
struct Observation {
  Role role;
  int turn = 0;
  bool terminated = false;
  std::string task_context;  // agent: domain guidelines; user: intent text
  json tool_schemas;         // array of schemas callable by this role
  json visible_history;      // array of {actor, kind, ...} events
};

struct StepResult {
  EnvState state;
  std::optional<ToolResult> tool_result;  // set iff the action was a tool call
};

// Deterministic dual-control environment over a Domain. All methods are
// const and side-effect free: state goes in, state comes out.
class Environment {
 public:
  explicit Environment(Domain domain) : domain_(std::move(domain)) {}

  const Domain& domain() const { return domain_; }

  // Initial state for a task: fixture entities, fixture clock, empty
  // history, user speaks first. Same task (and seed) => identical bytes.
  EnvState reset(const TaskSpec& task) const;
  EnvState reset_seed(uint64_t seed) const;  // no task context

  // Runs one tool call against the state without touching the
  // conversation: no history entry, no turn change. Read-only tools leave
  // the returned state byte-identical to the input. Contract violations
  // throw (UnknownTool, SchemaViolation, PolicyRejection,
  // PermissionDenied); business-level failures come back as status
  // "error" results with the state unchanged.
  std::pair<EnvState, ToolResult> execute_tool(const EnvState& state,
                                               Role caller,
                                               const ToolCall& call) const;

  // Advances the interaction by one joint action. Messages append to the
  // history, hand the floor to the other party and bump the turn counter;
  // a terminal control signal ends the episode. Tool calls execute, are
  // recorded together with their result, and leave the floor with the
  // caller. Contract violations are converted into recorded "rejected"
  // results so episodes continue; only out-of-turn or malformed joint
  // actions throw (ProtocolViolation).
  StepResult apply(const EnvState& state, const JointAction& action) const;

  Observation observe(const EnvState& state, Role role) const;

  bool is_terminal(const EnvState& state) const { return state.terminated(); }

 private:
  Domain domain_;
};

}  // namespace duet::env

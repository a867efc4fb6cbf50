#pragma once

#include <string>
#include <vector>

#include "duet/env/env.hpp"
#include "duet/policy/policy.hpp"
#include "duet/rollout/episode.hpp"
#include "duet/synth/backend.hpp"
#include "duet/synth/types.hpp"

namespace duet::synth {

// A backend may claim anything about a draft; these verdicts come from
// actually running the draft's tool calls against the environment, and they
// alone decide whether an instance advances.

struct FeasibilityIssue {
  std::string category;  // missing_resource | contradictory_constraints | policy_violation
  std::string description;
  std::string evidence;  // what was executed and what came back

  json to_json() const;
};

struct TaskVerdict {
  bool feasible = false;
  std::vector<FeasibilityIssue> issues;
  json probes = json::array();  // executed probe steps, in order

  json to_json() const;
};

// Executes the task's canonical tool arguments against a fresh initial
// state: entity lookups first, then identity cross-checks, then the
// must-have mutators on a scratch state. Policy gates firing -> the task
// asks for something the rules forbid; lookup failures -> it references
// entities that do not exist.
TaskVerdict probe_task_feasibility(const env::Environment& environment,
                                   const env::TaskSpec& task);

struct ValidationIssue {
  std::string category;
  int turn = -1;  // trajectory turn the issue anchors to, -1 = instance-level
  std::string evidence;

  json to_json() const;
};

struct TrajectoryVerdict {
  bool pass = false;
  std::vector<ValidationIssue> issues;
  int tool_calls_total = 0;
  int tool_calls_valid = 0;

  json to_json() const;
};

// Replays the dialogue and classifies every defect the replay surfaces:
// grammar failures, rejected or failed tool calls, must-have functions that
// never executed successfully.
TrajectoryVerdict validate_trajectory(const env::Environment& environment,
                                      const env::TaskSpec& task,
                                      const rollout::Trajectory& trajectory);

// Removes the given turns and renumbers the remainder. Only defect turns
// may be dropped (rejected/failed calls leave state untouched, so the
// remaining turns still replay).
rollout::Trajectory apply_trajectory_repair(const rollout::Trajectory& trajectory,
                                            std::vector<int> drop_turns);

// Fraction of the original must-have functions a repaired task keeps.
double must_have_preservation(const json& original_task, const json& repaired_task);

// Derives the acceptance checker from the validated dialogue itself: replay
// the turns, snapshot the final entities, record the successful must-have
// calls with their exact arguments, carry the scenario's policy focuses.
json build_checker(const env::Environment& environment, const env::TaskSpec& task,
                   const rollout::Trajectory& trajectory);

// Conversational policy whose turns come from a chat backend. Carries no
// token-level data (backend turns are not optimizable downstream).
class BackendPolicy : public policy::Policy {
 public:
  BackendPolicy(env::Role role, Worker worker, ChatBackend& backend,
                std::string prompt, json metadata);

  env::Role role() const override { return role_; }
  policy::PolicyOutput act(const env::Observation& obs, Rng& rng) override;

 private:
  env::Role role_;
  Worker worker_;
  ChatBackend* backend_;
  std::string prompt_;
  json metadata_;
  int turns_ = 0;
};

struct InstanceContext {
  int index = 0;
  uint64_t seed = 0;
  std::string phase = "pilot";  // "pilot" | "scale"
  bool repilot = false;
  int max_records = 24;
};

// Runs one instance through the plan's stages. Repairs (task-level and
// trajectory-level) share a single budget of plan.max_repair Modify calls;
// exhausting it, or failing a stage with no Modify stage planned, discards
// the instance with the reason recorded.
SynthesisInstance run_instance(const env::Environment& environment,
                               const WorkflowPlan& plan, const PromptSet& set,
                               ChatBackend& backend, const InstanceContext& ctx);

}  // namespace duet::synth

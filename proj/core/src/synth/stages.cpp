#include "duet/synth/stages.hpp"

#include <algorithm>
#include <set>

#include "duet/errors.hpp"
#include "duet/policy/parse.hpp"
#include "duet/verify/checker_spec.hpp"
#include "duet/verify/verify.hpp"

namespace duet::synth {

namespace {

json issue_array(const std::vector<FeasibilityIssue>& issues) {
  json out = json::array();
  for (const auto& i : issues) out.push_back(i.to_json());
  return out;
}

std::string payload_message(const env::ToolResult& r) {
  if (r.payload.is_object() && r.payload.contains("message")) {
    return r.payload["message"].get<std::string>();
  }
  return canonical(r.payload);
}

json probe_entry(const env::ToolCall& call, const std::string& status,
                 const std::string& detail) {
  return json{{"tool", call.name},
              {"arguments", call.arguments},
              {"status", status},
              {"detail", detail}};
}

// Chat messages for the engine-level (non-conversational) workers. The
// structured payload rides in the request metadata; the messages exist so a
// live backend sees the same prompt + instruction shape the mock does.
json worker_messages(const std::string& prompt, const std::string& instruction) {
  return json::array({json{{"role", "system"}, {"content", prompt}},
                      json{{"role", "user"}, {"content", instruction}}});
}

json parse_reply(Worker worker, const std::string& raw) {
  try {
    return json::parse(raw);
  } catch (const json::parse_error& e) {
    throw BackendError("worker " + worker_name(worker) +
                       " returned unparseable JSON: " + e.what());
  }
}

}  // namespace

json FeasibilityIssue::to_json() const {
  return json{{"category", category}, {"description", description}, {"evidence", evidence}};
}

json TaskVerdict::to_json() const {
  return json{{"feasible", feasible}, {"issues", issue_array(issues)}, {"probes", probes}};
}

json ValidationIssue::to_json() const {
  return json{{"category", category}, {"turn", turn}, {"evidence", evidence}};
}

json TrajectoryVerdict::to_json() const {
  json arr = json::array();
  for (const auto& i : issues) arr.push_back(i.to_json());
  return json{{"pass", pass},
              {"issues", arr},
              {"tool_calls_total", tool_calls_total},
              {"tool_calls_valid", tool_calls_valid}};
}

TaskVerdict probe_task_feasibility(const env::Environment& environment,
                                   const env::TaskSpec& task) {
  TaskVerdict verdict;
  env::EnvState state = environment.reset(task);
  const json& params = task.selected_parameters;
  const json args = params.is_object() ? params.value("tool_arguments", json::object())
                                       : json::object();
  const std::string user_id =
      params.is_object() ? params.value("user_id", std::string()) : std::string();

  // Executes one call, folding contract violations into a uniform shape so
  // the probe can keep going and report everything it saw.
  auto run = [&](const env::ToolCall& call)
      -> std::pair<env::ToolResult, std::string> {
    try {
      auto [next, result] = environment.execute_tool(state, env::Role::agent, call);
      if (result.ok()) state = next;
      return {result, std::string()};
    } catch (const PolicyRejection& e) {
      return {env::ToolResult{call.name, "rejected",
                              json{{"message", e.what()}, {"rule_id", e.rule_id()}}},
              "policy"};
    } catch (const UnknownTool& e) {
      return {env::ToolResult{call.name, "rejected", json{{"message", e.what()}}},
              "contract"};
    } catch (const SchemaViolation& e) {
      return {env::ToolResult{call.name, "rejected", json{{"message", e.what()}}},
              "contract"};
    } catch (const PermissionDenied& e) {
      return {env::ToolResult{call.name, "rejected", json{{"message", e.what()}}},
              "contract"};
    }
  };

  // Entity lookups: the ids the task names must exist.
  if (!user_id.empty() && environment.domain().has_tool("get_user_details")) {
    env::ToolCall call{"get_user_details", json{{"user_id", user_id}}};
    auto [result, kind] = run(call);
    verdict.probes.push_back(probe_entry(call, result.status, payload_message(result)));
    if (!result.ok()) {
      verdict.issues.push_back({"missing_resource", "task names a user that does not exist",
                                "get_user_details(" + user_id + ") -> " +
                                    payload_message(result)});
    }
  }
  const std::string reservation_id =
      params.is_object() ? params.value("reservation_id", std::string()) : std::string();
  if (!reservation_id.empty() && environment.domain().has_tool("get_reservation_details")) {
    env::ToolCall call{"get_reservation_details", json{{"reservation_id", reservation_id}}};
    auto [result, kind] = run(call);
    verdict.probes.push_back(probe_entry(call, result.status, payload_message(result)));
    if (!result.ok()) {
      verdict.issues.push_back(
          {"missing_resource", "task names a reservation that does not exist",
           "get_reservation_details(" + reservation_id + ") -> " +
               payload_message(result)});
    } else if (!user_id.empty() && result.payload.is_object() &&
               result.payload.value("user_id", user_id) != user_id) {
      verdict.issues.push_back(
          {"contradictory_constraints",
           "the reservation belongs to a different user than the task's caller",
           "get_reservation_details(" + reservation_id + ") -> owner " +
               result.payload["user_id"].get<std::string>() + ", caller " + user_id});
    }
  }

  // Identity cross-checks between the caller and the canonical arguments.
  if (!user_id.empty() && args.is_object()) {
    for (const auto& [tool, targs] : args.items()) {
      if (tool == "get_user_details" || !targs.is_object()) continue;
      const std::string arg_user = targs.value("user_id", user_id);
      if (arg_user != user_id) {
        verdict.issues.push_back(
            {"contradictory_constraints",
             "canonical arguments act on a different user than the task's caller",
             tool + " targets " + arg_user + ", caller is " + user_id});
      }
    }
  }

  // The must-have mutators, executed for real on the (discarded) state.
  // Cross-check failures above make execution results moot.
  if (verdict.issues.empty()) {
    for (const std::string& name : task.must_have_functions) {
      if (!args.is_object() || !args.contains(name)) {
        verdict.issues.push_back({"missing_resource",
                                  "no canonical arguments for a must-have function",
                                  "tool_arguments lacks an entry for " + name});
        continue;
      }
      env::ToolCall call{name, args[name]};
      auto [result, kind] = run(call);
      verdict.probes.push_back(probe_entry(call, result.status, payload_message(result)));
      if (result.ok()) continue;
      if (kind == "policy") {
        verdict.issues.push_back(
            {"policy_violation", "the requested operation is forbidden by policy",
             name + " -> " + payload_message(result)});
      } else {
        verdict.issues.push_back(
            {"missing_resource", "the requested operation cannot execute",
             name + " -> " + payload_message(result)});
      }
    }
  }

  verdict.feasible = verdict.issues.empty();
  return verdict;
}

TrajectoryVerdict validate_trajectory(const env::Environment& environment,
                                      const env::TaskSpec& task,
                                      const rollout::Trajectory& trajectory) {
  TrajectoryVerdict verdict;

  for (const auto& turn : trajectory.turns) {
    if (turn.actor != env::Role::agent) continue;
    if (!turn.parsed.ok) {
      verdict.issues.push_back(
          {"malformed_output", turn.index, "agent output failed the grammar: " + turn.parsed.error});
      continue;
    }
    if (!std::holds_alternative<env::ToolCall>(turn.parsed.payload)) continue;
    verdict.tool_calls_total += 1;
    if (!turn.tool_result) {
      verdict.issues.push_back({"failed_call", turn.index, "tool call recorded no result"});
      continue;
    }
    const env::ToolResult& r = *turn.tool_result;
    if (r.ok()) {
      verdict.tool_calls_valid += 1;
      continue;
    }
    if (r.status == "rejected") {
      const std::string kind = r.payload.is_object()
                                   ? r.payload.value("error_type", "rejected")
                                   : std::string("rejected");
      verdict.issues.push_back({kind, turn.index, payload_message(r)});
    } else {
      verdict.issues.push_back({"failed_call", turn.index, payload_message(r)});
    }
  }

  try {
    rollout::replay_trajectory(environment, task, trajectory);
  } catch (const ProtocolViolation& e) {
    verdict.issues.push_back({"replay_mismatch", -1, e.what()});
  }

  for (const std::string& name : task.must_have_functions) {
    bool done = false;
    for (const auto& turn : trajectory.turns) {
      if (turn.actor != env::Role::agent || !turn.tool_result) continue;
      const auto* call = std::get_if<env::ToolCall>(&turn.parsed.payload);
      if (call && call->name == name && turn.tool_result->ok()) {
        done = true;
        break;
      }
    }
    if (!done) {
      verdict.issues.push_back(
          {"goal_incomplete", -1, "must-have function " + name + " never executed successfully"});
    }
  }

  verdict.pass = verdict.issues.empty();
  return verdict;
}

rollout::Trajectory apply_trajectory_repair(const rollout::Trajectory& trajectory,
                                            std::vector<int> drop_turns) {
  std::sort(drop_turns.begin(), drop_turns.end());
  drop_turns.erase(std::unique(drop_turns.begin(), drop_turns.end()), drop_turns.end());
  for (int t : drop_turns) {
    if (t < 0 || t >= static_cast<int>(trajectory.turns.size())) {
      throw BadSpec("trajectory repair drops turn " + std::to_string(t) +
                    " outside the record");
    }
  }
  rollout::Trajectory out = trajectory;
  for (auto it = drop_turns.rbegin(); it != drop_turns.rend(); ++it) {
    out.turns.erase(out.turns.begin() + *it);
  }
  for (size_t i = 0; i < out.turns.size(); ++i) {
    out.turns[i].index = static_cast<int>(i);
  }
  return out;
}

double must_have_preservation(const json& original_task, const json& repaired_task) {
  std::set<std::string> original, repaired;
  for (const auto& f : original_task.value("must_have_functions", json::array())) {
    original.insert(f.get<std::string>());
  }
  for (const auto& f : repaired_task.value("must_have_functions", json::array())) {
    repaired.insert(f.get<std::string>());
  }
  if (original.empty()) return 1.0;
  int kept = 0;
  for (const auto& f : original) kept += repaired.count(f) ? 1 : 0;
  return static_cast<double>(kept) / static_cast<double>(original.size());
}

json build_checker(const env::Environment& environment, const env::TaskSpec& task,
                   const rollout::Trajectory& trajectory) {
  rollout::Replay replay = rollout::replay_trajectory(environment, task, trajectory);

  verify::CheckerSpec spec;
  spec.reference_final_state = json{{"entities", replay.final_state.entities}};
  spec.semantic_threshold = 0.5;

  const std::set<std::string> must(task.must_have_functions.begin(),
                                   task.must_have_functions.end());
  std::set<std::string> recorded;
  for (const auto& step : replay.tool_steps) {
    const std::string& name = step.call.name;
    if (!step.executed.ok() || !must.count(name) || recorded.count(name)) continue;
    if (environment.domain().has_tool(name) && environment.domain().tool(name).read_only) {
      continue;
    }
    verify::KeyFunction kf;
    kf.name = name;
    kf.critical_params = step.call.arguments;
    spec.key_functions.push_back(std::move(kf));
    recorded.insert(name);
  }

  const json& params = task.selected_parameters;
  if (params.is_object() && params.contains("policy_focuses")) {
    for (const auto& f : params["policy_focuses"]) {
      const std::string id = f.get<std::string>();
      spec.policy_focuses.push_back(
          environment.domain().has_rule(id) ? environment.domain().canonical_rule_id(id)
                                            : id);
    }
  }
  return spec.to_json();
}

BackendPolicy::BackendPolicy(env::Role role, Worker worker, ChatBackend& backend,
                             std::string prompt, json metadata)
    : role_(role),
      worker_(worker),
      backend_(&backend),
      prompt_(std::move(prompt)),
      metadata_(std::move(metadata)) {}

policy::PolicyOutput BackendPolicy::act(const env::Observation& obs, Rng&) {
  json meta = metadata_;
  meta["turn"] = turns_++;
  BackendRequest request{worker_, policy::render_chat_messages(obs, prompt_), meta};
  policy::PolicyOutput out;
  out.raw = backend_->complete(request);
  out.parsed = policy::parse_output(role_, out.raw);
  return out;
}

namespace {

// Shared repair budget: every Modify invocation, task- or trajectory-level,
// draws from the same pool of plan.max_repair calls.
struct RepairBudget {
  int remaining = 0;
  bool enabled = false;
};

json call_modify(ChatBackend& backend, const PromptSet& set, const json& meta_base,
                 const std::string& mode, const json& diagnostics) {
  json meta = meta_base;
  meta["mode"] = mode;
  meta["diagnostics"] = diagnostics;
  BackendRequest request{Worker::modify,
                         worker_messages(set.prompt_for(Worker::modify),
                                         "Repair the draft; diagnostics attached."),
                         meta};
  return parse_reply(Worker::modify, backend.complete(request));
}

}  // namespace

SynthesisInstance run_instance(const env::Environment& environment,
                               const WorkflowPlan& plan, const PromptSet& set,
                               ChatBackend& backend, const InstanceContext& ctx) {
  plan.validate();
  set.validate();

  SynthesisInstance inst;
  inst.set_id = set.set_id;
  inst.index = ctx.index;
  inst.seed = ctx.seed;

  json meta_base{{"set", set.set_id},
                 {"version", set.version},
                 {"instance", ctx.index},
                 {"phase", ctx.phase},
                 {"repilot", ctx.repilot}};

  RepairBudget budget{plan.max_repair, plan.has_stage(Stage::modify)};
  auto note_categories = [&](const std::vector<std::string>& cats) {
    for (const auto& c : cats) {
      if (std::find(inst.error_categories.begin(), inst.error_categories.end(), c) ==
          inst.error_categories.end()) {
        inst.error_categories.push_back(c);
      }
    }
  };
  auto discard = [&](const std::string& reason) -> SynthesisInstance& {
    inst.status = InstanceStatus::discarded;
    inst.discard_reason = reason;
    return inst;
  };

  bool first_probe = true;
  bool first_validation = true;
  env::TaskSpec task_spec;

  for (Stage stage : plan.stages) {
    switch (stage) {
      case Stage::random_pool: {
        BackendRequest request{Worker::random_pool,
                               worker_messages(set.prompt_for(Worker::random_pool),
                                               "Draw one scenario."),
                               meta_base};
        inst.scenario = parse_reply(Worker::random_pool, backend.complete(request));
        break;
      }

      case Stage::user_intent: {
        json meta = meta_base;
        meta["scenario"] = inst.scenario;
        BackendRequest request{Worker::user_intent,
                               worker_messages(set.prompt_for(Worker::user_intent),
                                               "Write the task for this scenario:\n" +
                                                   canonical(inst.scenario)),
                               meta};
        inst.task = parse_reply(Worker::user_intent, backend.complete(request));
        break;
      }

      case Stage::task_validation: {
        for (;;) {
          try {
            task_spec = env::TaskSpec::from_json(inst.task);
          } catch (const BadTask& e) {
            return discard("stage_contract:task_validation");
          }
          TaskVerdict verdict = probe_task_feasibility(environment, task_spec);
          if (first_probe) {
            first_probe = false;
            inst.infeasible_initially = !verdict.feasible;
          }
          if (verdict.feasible) break;
          std::vector<std::string> cats;
          for (const auto& i : verdict.issues) cats.push_back(i.category);
          note_categories(cats);
          if (!budget.enabled || budget.remaining == 0) return discard("infeasible");
          budget.remaining -= 1;
          inst.repair_count += 1;
          json reply = call_modify(backend, set, meta_base, "task", verdict.to_json());
          if (reply.value("repair_mode", "") != "TASK" || !reply.contains("task")) {
            return discard("stage_contract:modify");
          }
          const json& repaired = reply["task"];
          if (must_have_preservation(inst.task, repaired) < 0.8) {
            return discard("must_have_preservation");
          }
          inst.task = repaired;
        }
        break;
      }

      case Stage::dialog_synthesis: {
        task_spec = env::TaskSpec::from_json(inst.task);
        json meta = meta_base;
        meta["task"] = inst.task;
        BackendPolicy agent(env::Role::agent, Worker::trajectory, backend,
                            set.prompt_for(Worker::trajectory), meta);
        BackendPolicy user(env::Role::user, Worker::user_simulator, backend,
                           set.prompt_for(Worker::user_simulator), meta);
        rollout::EpisodeOptions options;
        options.seed = ctx.seed;
        options.max_records = ctx.max_records;
        rollout::EpisodeResult result =
            rollout::run_episode(environment, task_spec, agent, user, options);
        inst.trajectory = result.trajectory;
        if (inst.trajectory.termination == "error") {
          return discard("stage_contract:dialog_synthesis");
        }
        break;
      }

      case Stage::trajectory_validation: {
        task_spec = env::TaskSpec::from_json(inst.task);
        for (;;) {
          TrajectoryVerdict verdict = validate_trajectory(environment, task_spec,
                                                          inst.trajectory);
          if (first_validation) {
            first_validation = false;
            inst.tool_calls_total = verdict.tool_calls_total;
            inst.tool_calls_valid = verdict.tool_calls_valid;
          }
          if (verdict.pass) break;
          std::vector<std::string> cats;
          for (const auto& i : verdict.issues) cats.push_back(i.category);
          note_categories(cats);
          if (!budget.enabled || budget.remaining == 0) return discard("validation_failed");
          budget.remaining -= 1;
          inst.repair_count += 1;
          json turns = json::array();
          for (const auto& i : verdict.issues) {
            if (i.turn >= 0) turns.push_back(i.turn);
          }
          json diagnostics = verdict.to_json();
          diagnostics["turns"] = turns;
          json reply = call_modify(backend, set, meta_base, "trajectory", diagnostics);
          if (reply.value("repair_mode", "") != "TRAJECTORY" ||
              !reply.contains("drop_turns") || reply["drop_turns"].empty()) {
            return discard("validation_failed");
          }
          std::vector<int> drops;
          for (const auto& t : reply["drop_turns"]) drops.push_back(t.get<int>());
          inst.trajectory = apply_trajectory_repair(inst.trajectory, drops);
        }
        break;
      }

      case Stage::modify:
        // Modify is invoked from inside the validation loops; as a plan
        // position it only declares that repairs are allowed.
        break;

      case Stage::validation_function: {
        task_spec = env::TaskSpec::from_json(inst.task);
        inst.checker = build_checker(environment, task_spec, inst.trajectory);
        json full = inst.task;
        full["checker_spec"] = inst.checker;
        env::TaskSpec checked = env::TaskSpec::from_json(full);
        verify::VerificationReport report =
            verify::evaluate_submission(environment, checked, inst.trajectory);
        if (report.reward != 1.0) return discard("self_verification_failed");
        inst.task = full;
        inst.trajectory.reward = 1.0;
        inst.status = InstanceStatus::accepted;
        inst.discard_reason.clear();
        break;
      }
    }
  }
  return inst;
}

}  // namespace duet::synth

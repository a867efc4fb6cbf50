#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "duet/json.hpp"
#include "duet/verify/checker_spec.hpp"

namespace duet::env {

// A task instance: the user-side intent (what the simulated user wants and
// knows), machine-readable slots, and — once the instance has been
// accepted by the synthesis pipeline — the checker used to grade episodes.
struct TaskSpec {
  std::string id;
  std::string domain;

  // Intent fields, shown to the user simulator only; the agent must elicit
  // them through conversation.
  std::string context;
  std::string purpose;
  std::string reason_for_call;
  std::string known_info;
  std::string task_instructions;
  std::string rubrics;

  std::vector<std::string> must_have_functions;
  uint64_t initial_state_seed = 0;
  // Machine-readable slots: entity ids, archetype, canonical tool
  // arguments. Free-form object; consumers pick what they understand.
  json selected_parameters = json::object();

  std::optional<verify::CheckerSpec> checker_spec;

  json to_json() const;
  static TaskSpec from_json(const json& j);  // throws BadTask

  const verify::CheckerSpec& checker() const {
    if (!checker_spec) throw BadTask("task '" + id + "' has no checker_spec");
    return *checker_spec;
  }
};

TaskSpec load_task_file(const std::string& path);
TaskSpec builtin_toy_cancel_task();

}  // namespace duet::env

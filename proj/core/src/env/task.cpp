#include "duet/env/task.hpp"

#include "duet/embedded.hpp"
#include "duet/jsonl.hpp"

namespace duet::env {

json TaskSpec::to_json() const {
  json j{{"id", id},
         {"domain", domain},
         {"context", context},
         {"purpose", purpose},
         {"reason_for_call", reason_for_call},
         {"known_info", known_info},
         {"task_instructions", task_instructions},
         {"rubrics", rubrics},
         {"must_have_functions", must_have_functions},
         {"initial_state_seed", initial_state_seed},
         {"selected_parameters", selected_parameters}};
  if (checker_spec) j["checker_spec"] = checker_spec->to_json();
  return j;
}

TaskSpec TaskSpec::from_json(const json& j) {
  TaskSpec t;
  t.id = require_string<BadTask>(j, "id", "task");
  const std::string where = "task '" + t.id + "'";
  t.domain = require_string<BadTask>(j, "domain", where);
  t.purpose = require_string<BadTask>(j, "purpose", where);
  t.context = j.value("context", std::string());
  t.reason_for_call = j.value("reason_for_call", std::string());
  t.known_info = j.value("known_info", std::string());
  t.task_instructions = j.value("task_instructions", std::string());
  t.rubrics = j.value("rubrics", std::string());
  if (j.contains("must_have_functions")) {
    const json& fns = j["must_have_functions"];
    if (!fns.is_array()) throw BadTask(where + ": must_have_functions must be an array");
    for (const json& f : fns) {
      if (!f.is_string()) throw BadTask(where + ": must_have_functions entries must be strings");
      t.must_have_functions.push_back(f.get<std::string>());
    }
  }
  t.initial_state_seed = j.value("initial_state_seed", 0ull);
  t.selected_parameters = j.value("selected_parameters", json::object());
  if (!t.selected_parameters.is_object()) {
    throw BadTask(where + ": selected_parameters must be an object");
  }
  if (j.contains("checker_spec") && !j["checker_spec"].is_null()) {
    t.checker_spec = verify::CheckerSpec::from_json(j["checker_spec"]);
  }
  return t;
}

TaskSpec load_task_file(const std::string& path) {
  return TaskSpec::from_json(read_json_file(path));
}

TaskSpec builtin_toy_cancel_task() {
  static const json j = json::parse(embedded::toy_cancel_task_json());
  return TaskSpec::from_json(j);
}

}  // namespace duet::env

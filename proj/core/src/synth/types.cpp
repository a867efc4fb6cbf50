#include "duet/synth/types.hpp"

#include <algorithm>

#include "duet/errors.hpp"

namespace duet::synth {

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> stages = {
      Stage::random_pool,       Stage::user_intent,
      Stage::task_validation,   Stage::dialog_synthesis,
      Stage::trajectory_validation, Stage::modify,
      Stage::validation_function,
  };
  return stages;
}

std::string stage_name(Stage stage) {
  switch (stage) {
    case Stage::random_pool: return "random_pool";
    case Stage::user_intent: return "user_intent";
    case Stage::task_validation: return "task_validation";
    case Stage::dialog_synthesis: return "dialog_synthesis";
    case Stage::trajectory_validation: return "trajectory_validation";
    case Stage::modify: return "modify";
    case Stage::validation_function: return "validation_function";
  }
  throw BadPlan("unmapped stage value");
}

Stage stage_from_name(const std::string& name) {
  for (Stage stage : all_stages()) {
    if (stage_name(stage) == name) return stage;
  }
  throw BadPlan("unknown stage id: " + name);
}

const std::vector<Worker>& execution_workers() {
  static const std::vector<Worker> workers = {
      Worker::random_pool, Worker::user_intent,   Worker::task_validation,
      Worker::user_simulator, Worker::trajectory, Worker::trajectory_validation,
      Worker::modify,      Worker::validation_function,
  };
  return workers;
}

std::string worker_name(Worker worker) {
  switch (worker) {
    case Worker::planner: return "planner";
    case Worker::prompt_engineer: return "prompt_engineer";
    case Worker::judge: return "judge";
    case Worker::random_pool: return "random_pool";
    case Worker::user_intent: return "user_intent";
    case Worker::task_validation: return "task_validation";
    case Worker::user_simulator: return "user_simulator";
    case Worker::trajectory: return "trajectory";
    case Worker::trajectory_validation: return "trajectory_validation";
    case Worker::modify: return "modify";
    case Worker::validation_function: return "validation_function";
  }
  throw BadPlan("unmapped worker value");
}

Worker worker_from_name(const std::string& name) {
  static const std::vector<Worker> everyone = {
      Worker::planner, Worker::prompt_engineer, Worker::judge,
      Worker::random_pool, Worker::user_intent, Worker::task_validation,
      Worker::user_simulator, Worker::trajectory, Worker::trajectory_validation,
      Worker::modify, Worker::validation_function,
  };
  for (Worker w : everyone) {
    if (worker_name(w) == name) return w;
  }
  throw BadPlan("unknown worker id: " + name);
}

std::vector<Worker> stage_workers(Stage stage) {
  if (stage == Stage::dialog_synthesis) {
    return {Worker::user_simulator, Worker::trajectory};
  }
  return {worker_from_name(stage_name(stage))};
}

WorkflowPlan WorkflowPlan::canonical() {
  WorkflowPlan plan;
  plan.stages = all_stages();
  return plan;
}

bool WorkflowPlan::has_stage(Stage stage) const {
  return std::find(stages.begin(), stages.end(), stage) != stages.end();
}

void WorkflowPlan::validate() const {
  if (stages.empty()) throw BadPlan("workflow has no stages");
  if (stages.back() != Stage::validation_function) {
    throw BadPlan("workflow must end with validation_function");
  }
  if (stages.size() != all_stages().size()) {
    throw BadPlan("workflow must contain every known stage exactly once");
  }
  for (Stage stage : all_stages()) {
    if (std::count(stages.begin(), stages.end(), stage) != 1) {
      throw BadPlan("stage " + stage_name(stage) + " must appear exactly once");
    }
  }
  if (max_repair < 0 || max_prompt_iterations < 1) {
    throw BadPlan("workflow bounds out of range");
  }
}

json WorkflowPlan::to_json() const {
  json names = json::array();
  for (Stage stage : stages) names.push_back(stage_name(stage));
  return json{{"stages", names},
              {"max_repair", max_repair},
              {"max_prompt_iterations", max_prompt_iterations}};
}

WorkflowPlan WorkflowPlan::from_json(const json& j) {
  WorkflowPlan plan;
  const json& names = require_field<BadPlan>(j, "stages", "workflow plan");
  if (!names.is_array()) throw BadPlan("workflow stages must be an array");
  for (const json& n : names) {
    if (!n.is_string()) throw BadPlan("workflow stage ids must be strings");
    plan.stages.push_back(stage_from_name(n.get<std::string>()));
  }
  plan.max_repair = j.value("max_repair", 3);
  plan.max_prompt_iterations = j.value("max_prompt_iterations", 16);
  plan.validate();
  return plan;
}

json Finding::to_json() const {
  return json{{"category", category}, {"description", description}, {"evidence", evidence}};
}

Finding Finding::from_json(const json& j) {
  Finding f;
  f.category = require_string<BadSpec>(j, "category", "finding");
  f.description = j.value("description", std::string());
  f.evidence = require_string<BadSpec>(j, "evidence", "finding");
  return f;
}

double Critique::mean_score() const {
  return (executability + tool_correctness + trajectory_coherence + difficulty_coverage) / 4.0;
}

void Critique::validate() const {
  for (double score : {executability, tool_correctness, trajectory_coherence,
                       difficulty_coverage}) {
    if (score < 0.0 || score > 1.0) {
      throw BadSpec("critique '" + id + "': axis score out of [0,1]");
    }
  }
  for (const Finding& f : findings) {
    if (f.evidence.empty()) {
      throw BadSpec("critique '" + id + "': finding without evidence");
    }
  }
}

json Critique::to_json() const {
  json findings_json = json::array();
  for (const Finding& f : findings) findings_json.push_back(f.to_json());
  return json{{"id", id},
              {"target", target},
              {"executability", executability},
              {"tool_correctness", tool_correctness},
              {"trajectory_coherence", trajectory_coherence},
              {"difficulty_coverage", difficulty_coverage},
              {"findings", findings_json}};
}

Critique Critique::from_json(const json& j) {
  Critique c;
  c.id = require_string<BadSpec>(j, "id", "critique");
  c.target = j.value("target", std::string());
  c.executability = j.value("executability", 0.0);
  c.tool_correctness = j.value("tool_correctness", 0.0);
  c.trajectory_coherence = j.value("trajectory_coherence", 0.0);
  c.difficulty_coverage = j.value("difficulty_coverage", 0.0);
  for (const json& f : j.value("findings", json::array())) {
    c.findings.push_back(Finding::from_json(f));
  }
  c.validate();
  return c;
}

json PromptSet::LineageStep::to_json() const {
  return json{{"from_version", from_version}, {"critique_ids", critique_ids}};
}

PromptSet::LineageStep PromptSet::LineageStep::from_json(const json& j) {
  LineageStep step;
  step.from_version = j.value("from_version", 0);
  for (const json& id : j.value("critique_ids", json::array())) {
    step.critique_ids.push_back(id.get<std::string>());
  }
  return step;
}

const std::string& PromptSet::prompt_for(Worker worker) const {
  const auto it = prompts.find(worker_name(worker));
  if (it == prompts.end()) {
    throw BadPlan("prompt set " + std::to_string(set_id) + " has no prompt for " +
                  worker_name(worker));
  }
  return it->second;
}

void PromptSet::validate() const {
  if (version != static_cast<int>(lineage.size()) + 1) {
    throw BadPlan("prompt set version must equal lineage length + 1");
  }
  for (size_t i = 0; i < lineage.size(); ++i) {
    if (lineage[i].from_version != static_cast<int>(i) + 1) {
      throw BadPlan("prompt set lineage must be contiguous from version 1");
    }
  }
  for (Worker worker : execution_workers()) {
    const auto it = prompts.find(worker_name(worker));
    if (it == prompts.end() || it->second.empty()) {
      throw BadPlan("prompt set missing prompt for worker " + worker_name(worker));
    }
  }
}

json PromptSet::to_json() const {
  json lineage_json = json::array();
  for (const LineageStep& step : lineage) lineage_json.push_back(step.to_json());
  return json{{"set_id", set_id},
              {"version", version},
              {"prompts", prompts},
              {"lineage", lineage_json}};
}

PromptSet PromptSet::from_json(const json& j) {
  PromptSet set;
  set.set_id = j.value("set_id", 0);
  set.version = j.value("version", 1);
  for (auto it = j.at("prompts").begin(); it != j.at("prompts").end(); ++it) {
    set.prompts[it.key()] = it.value().get<std::string>();
  }
  for (const json& step : j.value("lineage", json::array())) {
    set.lineage.push_back(LineageStep::from_json(step));
  }
  set.validate();
  return set;
}

std::string SynthesisInstance::artifact_id() const {
  return "set" + std::to_string(set_id) + "-inst" + std::to_string(index);
}

json SynthesisInstance::to_json() const {
  return json{{"set_id", set_id},
              {"index", index},
              {"seed", seed},
              {"scenario", scenario},
              {"task", task},
              {"trajectory", trajectory.to_json()},
              {"checker", checker},
              {"status", status == InstanceStatus::accepted ? "accepted" : "discarded"},
              {"discard_reason", discard_reason},
              {"repair_count", repair_count},
              {"infeasible_initially", infeasible_initially},
              {"error_categories", error_categories},
              {"tool_calls_total", tool_calls_total},
              {"tool_calls_valid", tool_calls_valid}};
}

SynthesisInstance SynthesisInstance::from_json(const json& j) {
  SynthesisInstance inst;
  inst.set_id = j.value("set_id", 0);
  inst.index = j.value("index", 0);
  inst.seed = j.value("seed", 0ull);
  inst.scenario = j.value("scenario", json::object());
  inst.task = j.value("task", json::object());
  if (j.contains("trajectory")) {
    inst.trajectory = rollout::Trajectory::from_json(j["trajectory"]);
  }
  inst.checker = j.value("checker", json::object());
  inst.status = j.value("status", std::string()) == "accepted" ? InstanceStatus::accepted
                                                               : InstanceStatus::discarded;
  inst.discard_reason = j.value("discard_reason", std::string());
  inst.repair_count = j.value("repair_count", 0);
  inst.infeasible_initially = j.value("infeasible_initially", false);
  for (const json& c : j.value("error_categories", json::array())) {
    inst.error_categories.push_back(c.get<std::string>());
  }
  inst.tool_calls_total = j.value("tool_calls_total", 0);
  inst.tool_calls_valid = j.value("tool_calls_valid", 0);
  return inst;
}

}  // namespace duet::synth

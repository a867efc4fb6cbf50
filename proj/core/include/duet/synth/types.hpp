#pragma once

#include <map>
#include <string>
#include <vector>

#include "duet/json.hpp"
#include "duet/rollout/trajectory.hpp"

namespace duet::synth {

// Execution-layer stages of the generation workflow, in canonical order.
enum class Stage {
  random_pool,
  user_intent,
  task_validation,
  dialog_synthesis,
  trajectory_validation,
  modify,
  validation_function,
};

const std::vector<Stage>& all_stages();
std::string stage_name(Stage stage);
Stage stage_from_name(const std::string& name);  // throws BadPlan

// Every chat-completion caller in the system: three orchestration agents
// plus the execution-layer workers. dialog synthesis binds two workers
// (one per conversation side).
enum class Worker {
  planner,
  prompt_engineer,
  judge,
  random_pool,
  user_intent,
  task_validation,
  user_simulator,
  trajectory,
  trajectory_validation,
  modify,
  validation_function,
};

const std::vector<Worker>& execution_workers();
std::string worker_name(Worker worker);
Worker worker_from_name(const std::string& name);  // throws BadPlan
std::vector<Worker> stage_workers(Stage stage);

// An ordered stage list plus the loop bounds the runner enforces no
// matter what any backend says.
struct WorkflowPlan {
  std::vector<Stage> stages;
  int max_repair = 3;             // Modify invocations per instance
  int max_prompt_iterations = 16; // evolution steps per prompt set

  static WorkflowPlan canonical();
  bool has_stage(Stage stage) const;
  // Exactly the known stages, each once, ending in validation_function.
  void validate() const;  // throws BadPlan

  json to_json() const;
  static WorkflowPlan from_json(const json& j);
};

struct Finding {
  std::string category;
  std::string description;
  std::string evidence;

  json to_json() const;
  static Finding from_json(const json& j);
};

// Structured output of the judge for one artifact.
struct Critique {
  std::string id;
  std::string target;  // artifact id the critique is about
  double executability = 0.0;
  double tool_correctness = 0.0;
  double trajectory_coherence = 0.0;
  double difficulty_coverage = 0.0;
  std::vector<Finding> findings;

  double mean_score() const;
  void validate() const;  // throws BadSpec: scores in [0,1], evidence nonempty

  json to_json() const;
  static Critique from_json(const json& j);
};

// Versioned prompt bundle for the execution workers of one prompt set.
struct PromptSet {
  struct LineageStep {
    int from_version = 0;
    std::vector<std::string> critique_ids;

    json to_json() const;
    static LineageStep from_json(const json& j);
  };

  int set_id = 0;
  int version = 1;
  std::map<std::string, std::string> prompts;  // worker name -> prompt text
  std::vector<LineageStep> lineage;

  const std::string& prompt_for(Worker worker) const;  // throws BadPlan
  // Versions are contiguous from 1: version == lineage.size() + 1, and
  // every bound execution worker has a nonempty prompt.
  void validate() const;  // throws BadPlan

  json to_json() const;
  static PromptSet from_json(const json& j);
};

enum class InstanceStatus { accepted, discarded };

// One synthesized task+dialogue+checker bundle with its audit trail.
struct SynthesisInstance {
  int set_id = 0;
  int index = 0;  // global instance index within the run
  uint64_t seed = 0;

  json scenario = json::object();  // randomization factors
  json task = json::object();      // task spec (without checker until accepted)
  rollout::Trajectory trajectory;
  json checker = json::object();   // checker spec derived from the trajectory

  InstanceStatus status = InstanceStatus::discarded;
  std::string discard_reason;
  int repair_count = 0;
  bool infeasible_initially = false;
  std::vector<std::string> error_categories;  // validation issue categories seen
  int tool_calls_total = 0;
  int tool_calls_valid = 0;

  std::string artifact_id() const;  // "set<k>-inst<index>"
  bool accepted() const { return status == InstanceStatus::accepted; }

  json to_json() const;
  static SynthesisInstance from_json(const json& j);
};

}  // namespace duet::synth

#pragma once

#include <string>
#include <vector>

#include "duet/env/env.hpp"
#include "duet/synth/backend.hpp"
#include "duet/synth/stages.hpp"
#include "duet/synth/types.hpp"

namespace duet::synth {

// ---- orchestration: planner ------------------------------------------------

// Asks the planning agent for a stage chain and validates it against the
// runner's invariants (exactly the known stages, checker construction last,
// sane loop bounds). A plan that fails validation throws BadPlan.
WorkflowPlan plan_workflow(const std::string& request, const env::Domain& domain,
                           const json& targets, ChatBackend& backend);

// ---- orchestration: prompt engineer -----------------------------------------

// One-line digest of a prompt set, fed back to the prompt engineer so later
// sets diversify against earlier ones.
std::string summarize_prompt_set(const PromptSet& set);

PromptSet generate_prompt_set(const WorkflowPlan& plan,
                              const std::vector<std::string>& prior_summaries,
                              int k_index, ChatBackend& backend);

// Produces version+1 of the set from judge critiques. Refuses to evolve on
// an empty critique list: unguided mutation is how prompt sets drift.
PromptSet evolve(const PromptSet& set, const std::vector<Critique>& critiques,
                 ChatBackend& backend);

// ---- orchestration: judge ----------------------------------------------------

Critique judge_instance(const SynthesisInstance& instance, int version,
                        ChatBackend& backend);

// ---- pilot -------------------------------------------------------------------

struct PilotCriteria {
  double max_infeasibility = 0.10;
  double min_tool_validity = 0.95;
  double max_score_delta = 0.05;
  int min_iterations = 3;
};

struct PilotMetrics {
  int iteration = 0;  // 1-based
  int version = 0;
  double infeasibility_rate = 0.0;
  double tool_call_validity = 0.0;
  double judge_mean = 0.0;
  double repair_mean = 0.0;
  int accepted = 0;
  int batch = 0;

  json to_json() const;
};

struct PilotResult {
  PromptSet set;  // as evolved by the loop
  std::vector<PilotMetrics> history;
  bool converged = false;
  // Drift baseline for the scale phase: repair load and defect vocabulary
  // of the final pilot batch.
  double baseline_repair_mean = 0.0;
  std::vector<std::string> known_categories;
};

// Small-batch generate -> judge -> evolve loop. Stops once the batch clears
// the criteria and the judge score has stabilized; gives up (converged =
// false) after plan.max_prompt_iterations. batch_size outside [5, 20]
// throws BadConfig.
PilotResult run_pilot(const env::Environment& environment, const WorkflowPlan& plan,
                      PromptSet set, int batch_size, const PilotCriteria& criteria,
                      ChatBackend& backend, uint64_t seed, bool repilot = false);

// ---- scale -------------------------------------------------------------------

struct ScaleOptions {
  int n_target = 50;
  double audit_rate = 0.2;  // fraction of accepted instances judged; 0 disables
  int batch_size = 8;       // for drift re-pilots
  int max_attempts_factor = 10;
  uint64_t seed = 0;
  std::string archive_dir;  // empty = no archive written
  PilotCriteria criteria;
};

struct ScaleResult {
  int accepted = 0;
  int attempted = 0;
  int drift_pauses = 0;
  std::vector<SynthesisInstance> instances;  // accepted, in acceptance order
  std::vector<PromptSet> sets;               // final per-set prompt versions
  json audit_log = json::array();
  json manifest;
};

// Round-robin volume generation over the piloted sets with a drift watch on
// a trailing window of audited instances: a defect category the pilots
// never produced, or repair load far above the pilot baseline, pauses the
// affected set and re-pilots it locally. Recovery resumes generation; a
// re-pilot that cannot converge throws DriftUnrecoverable.
ScaleResult run_scale(const env::Environment& environment, const WorkflowPlan& plan,
                      std::vector<PilotResult> pilots, const ScaleOptions& options,
                      ChatBackend& backend);

// ---- full pipeline -----------------------------------------------------------

struct ThreePhaseOptions {
  std::string request = "Generate tool-use customer service tasks with dialogues.";
  json targets = json::object();
  int prompt_sets = 4;  // K
  int n_target = 50;
  int batch_size = 8;
  double audit_rate = 0.2;
  uint64_t seed = 0;
  std::string archive_dir;
  PilotCriteria criteria;
  int pilot_threads = 4;
};

struct ThreePhaseResult {
  WorkflowPlan plan;
  std::vector<PilotResult> pilots;
  ScaleResult scale;
};

// Plan -> K diversified prompt sets -> parallel pilots (all must converge,
// else PilotDiverged) -> monitored scale-up. Fully deterministic for a
// given seed: pilot parallelism only changes wall time, never bytes.
ThreePhaseResult run_three_phase(const env::Environment& environment,
                                 const ThreePhaseOptions& options, ChatBackend& backend);

}  // namespace duet::synth

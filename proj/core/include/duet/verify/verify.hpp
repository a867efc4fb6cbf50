#pragma once

#include <string>
#include <vector>

#include "duet/rollout/episode.hpp"
#include "duet/rollout/trajectory.hpp"
#include "duet/verify/checker_spec.hpp"

namespace duet::verify {

// How a field participates in state comparison. Timestamps, generated ids
// and similar run-dependent values are skipped; free-text fields match
// fuzzily; everything else must be byte-equal.
enum class FieldKind { exact, semantic, skip };

// Classification looks at the spec's overrides first (full path, then
// trailing key), then falls back to suffix conventions. Numeric path
// segments (array indices) are transparent: the nearest named segment
// decides.
FieldKind classify_field(const std::string& path, const CheckerSpec& spec);

// Word-set similarity in [0,1]: lowercase, split on non-alphanumerics,
// dedupe, then Jaccard overlap. Both-empty compares equal (1), exactly one
// empty compares disjoint (0).
double fuzzy_text_match(std::string_view a, std::string_view b);

struct FieldCheck {
  std::string path;
  std::string kind;    // "exact" | "semantic" | "structure"
  bool passed = false;
  double score = 1.0;  // fuzzy score for semantic fields
  json expected;
  json actual;

  json to_json() const;
};

struct CompareResult {
  double fraction = 1.0;  // passed / counted (1.0 when nothing counted)
  int counted = 0;
  int passed = 0;
  std::vector<FieldCheck> checks;  // failures plus semantic near-misses
};

// Field-by-field comparison of two entity trees (union walk: extra and
// missing fields both count against the score). Skipped fields never
// enter the denominator.
CompareResult deep_compare(const json& expected, const json& actual,
                           const CheckerSpec& spec);

struct FunctionCheck {
  std::string name;
  bool matched = false;
  int turn_index = -1;  // trajectory turn of the matched call
  std::string detail;

  json to_json() const;
};

// Order-free matching of required tool invocations against the calls that
// actually executed successfully during replay. Each replayed call can
// satisfy at most one requirement.
std::vector<FunctionCheck> match_key_functions(const std::vector<KeyFunction>& required,
                                               const std::vector<rollout::ReplayStep>& steps,
                                               double semantic_threshold);

struct PolicyCheck {
  std::string rule_id;  // canonical id
  bool passed = false;
  std::string detail;

  json to_json() const;
};

// Independent re-derivation of the focused policy rules against the
// replayed tool calls: each successful state-changing call is judged from
// the database snapshot it ran against. This does not trust the
// environment's own enforcement — a rule passes only if no successful call
// violated it under the verifier's own reading of the rule.
// Unknown rule ids throw UnknownRule.
std::vector<PolicyCheck> check_policies(const env::Domain& domain,
                                        const std::vector<std::string>& focuses,
                                        const std::vector<rollout::ReplayStep>& steps);

struct VerificationReport {
  bool overall_pass = false;
  double reward = 0.0;
  bool replay_ok = false;
  std::string failure;  // set when the trajectory could not replay
  double state_score = 0.0;
  double functions_score = 0.0;
  double policy_score = 0.0;
  std::vector<FieldCheck> state_checks;
  std::vector<FunctionCheck> function_checks;
  std::vector<PolicyCheck> policy_checks;

  json to_json() const;
};

// Full verification of a submitted trajectory for a task with a checker:
// replays every turn (recorded tool results are never trusted), compares
// the replayed final state to the reference, matches required functions
// and re-derives policy compliance. The reward is binary: 1.0 exactly
// when all three components are perfect.
VerificationReport evaluate_submission(const env::Environment& environment,
                                       const env::TaskSpec& task,
                                       const rollout::Trajectory& trajectory);

// Adapter for the rollout layer: score = evaluate_submission(...).reward.
// Pure and thread-safe; environment and task must outlive the returned
// function.
rollout::RewardFn make_scorer(const env::Environment& environment, const env::TaskSpec& task);

}  // namespace duet::verify

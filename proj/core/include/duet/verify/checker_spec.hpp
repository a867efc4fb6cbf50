#pragma once

#include <map>
#include <string>
#include <vector>

#include "duet/errors.hpp"
#include "duet/json.hpp"

namespace duet::verify {

// One tool invocation the trajectory must contain to count as solved.
// Critical parameters must match exactly; semantic parameters may match
// fuzzily. Matching is order-free across the trajectory.
struct KeyFunction {
  std::string name;
  json critical_params = json::object();
  json semantic_params = json::object();

  json to_json() const;
  static KeyFunction from_json(const json& j);
};

// Declarative description of what a correct outcome looks like. Checkers
// are data, not generated code: the comparison semantics live in the
// verifier and are shared by every task.
struct CheckerSpec {
  // Snapshot of the expected final state; at minimum an "entities" object.
  json reference_final_state;
  std::vector<KeyFunction> key_functions;
  std::vector<std::string> policy_focuses;
  // Per-field class overrides, keyed by full path or trailing key name;
  // values: "exact" | "semantic" | "skip".
  std::map<std::string, std::string> field_overrides;
  double semantic_threshold = 0.5;

  json to_json() const;
  static CheckerSpec from_json(const json& j);  // throws BadSpec
};

}  // namespace duet::verify

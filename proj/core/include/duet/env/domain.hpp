#pragma once

#include <string>
#include <vector>

#include "duet/env/tools.hpp"
#include "duet/json.hpp"

namespace duet::env {

struct PolicyRule {
  std::string id;
  std::string description;
};

// Immutable description of a tool-calling domain: the tool registry, the
// initial entity database, the policy rule table and a fixed clock. Loaded
// from a fixture JSON ({tools, entities, policy_rules, ...}) and shared by
// environments, verifiers and the synthesis pipeline.
class Domain {
 public:
  static Domain from_json(const json& fixture);  // throws BadFixture
  static Domain load_file(const std::string& path);
  // Built-in fixtures compiled into the library.
  static Domain builtin_airline();
  static Domain builtin_toy();
  // Resolves "airline" / "toy" to a builtin, anything else as a file path.
  static Domain named_or_file(const std::string& name_or_path);

  const std::string& name() const { return name_; }
  const std::string& semantics() const { return semantics_; }
  const std::string& now() const { return now_; }

  const std::vector<ToolSchema>& tools() const { return tools_; }
  bool has_tool(const std::string& name) const;
  const ToolSchema& tool(const std::string& name) const;  // throws UnknownTool
  // Schemas callable by `role`, in registry order, as a JSON array.
  json tool_schemas_json(Role role) const;

  const std::vector<PolicyRule>& policy_rules() const { return rules_; }
  // Alias-aware lookup (historical spellings of rule ids are accepted);
  // returns the canonical id or throws UnknownRule.
  std::string canonical_rule_id(const std::string& id) const;
  bool has_rule(const std::string& id) const;

  const json& initial_entities() const { return entities_; }
  // Short operating-policy text given to agent policies as system context.
  const std::string& agent_guidelines() const { return agent_guidelines_; }

  json to_json() const;

 private:
  std::string name_;
  std::string semantics_;
  std::string now_;
  std::string agent_guidelines_;
  std::vector<ToolSchema> tools_;
  std::vector<PolicyRule> rules_;
  json entities_;
};

}  // namespace duet::env

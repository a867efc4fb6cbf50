#pragma once

#include <string>
#include <vector>

#include "duet/env/action.hpp"
#include "duet/json.hpp"

namespace duet::env {

// Which party may invoke a tool. Both-party tools are what makes the
// environment dual-control: the simulated user can act on the world too.
enum class ToolRole { agent, user, both };

inline bool role_allowed(ToolRole allowed, Role caller) {
  if (allowed == ToolRole::both) return true;
  return (allowed == ToolRole::agent) == (caller == Role::agent);
}

struct ParamSpec {
  std::string name;
  std::string type;  // string | integer | number | boolean | array | object
  bool required = true;
  std::string description;
};

struct ToolSchema {
  std::string name;
  std::string description;
  std::vector<ParamSpec> params;
  bool read_only = false;
  ToolRole allowed = ToolRole::agent;

  json to_json() const;
  static ToolSchema from_json(const json& j);
};

// Checks an argument object against the schema: required params present,
// declared types respected, no undeclared params. Throws SchemaViolation.
void validate_args(const ToolSchema& schema, const json& args);

struct ToolResult {
  std::string tool;
  // "ok"       tool ran (possibly a read returning a business-level error
  //            payload such as "reservation not found")
  // "error"    tool ran but refused the operation on business grounds;
  //            state is unchanged
  // "rejected" the call violated a hard contract (unknown tool, schema,
  //            permission, or policy rule); state is unchanged
  std::string status;
  json payload;

  bool ok() const { return status == "ok"; }
  json to_json() const;
  static ToolResult from_json(const json& j);
};

}  // namespace duet::env

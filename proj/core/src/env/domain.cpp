#include "duet/env/domain.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>

#include "duet/embedded.hpp"
#include "duet/jsonl.hpp"

namespace duet::env {

namespace {

ToolRole tool_role_from(const std::string& s, const std::string& where) {
  if (s == "agent") return ToolRole::agent;
  if (s == "user") return ToolRole::user;
  if (s == "both") return ToolRole::both;
  throw BadFixture(where + ": bad tool role '" + s + "'");
}

const std::set<std::string> kParamTypes = {"string", "integer", "number",
                                           "boolean", "array", "object"};

// Historical spellings of rule ids seen in upstream material; lookups
// accept either form so checkers written against old names keep working.
const std::unordered_map<std::string, std::string> kRuleAliases = {
    {"passenger_max_5", "passenger_max_five"},
    {"passenger_max_five_limit", "passenger_max_five"},
    {"basic_economy_modification_prohibition", "basic_economy_mod"},
    {"cancellation_24h_rule", "cancellation_window"},
    {"baggage_addition_only", "baggage_add_only"},
    {"compensation_membership_requirement", "compensation_membership"},
};

}  // namespace

json ToolSchema::to_json() const {
  json ps = json::array();
  for (const auto& p : params) {
    ps.push_back({{"name", p.name},
                  {"type", p.type},
                  {"required", p.required},
                  {"description", p.description}});
  }
  const char* role = allowed == ToolRole::agent  ? "agent"
                     : allowed == ToolRole::user ? "user"
                                                 : "both";
  return json{{"name", name},
              {"description", description},
              {"read_only", read_only},
              {"allowed", role},
              {"params", ps}};
}

ToolSchema ToolSchema::from_json(const json& j) {
  ToolSchema t;
  t.name = require_string<BadFixture>(j, "name", "tool");
  const std::string where = "tool '" + t.name + "'";
  t.description = j.value("description", std::string());
  t.read_only = j.value("read_only", false);
  t.allowed = tool_role_from(j.value("allowed", std::string("agent")), where);
  for (const json& pj : require_field<BadFixture>(j, "params", where)) {
    ParamSpec p;
    p.name = require_string<BadFixture>(pj, "name", where + " param");
    p.type = require_string<BadFixture>(pj, "type", where + " param " + p.name);
    if (!kParamTypes.count(p.type)) {
      throw BadFixture(where + ": param '" + p.name + "' has unknown type '" +
                       p.type + "'");
    }
    p.required = pj.value("required", true);
    p.description = pj.value("description", std::string());
    t.params.push_back(std::move(p));
  }
  return t;
}

void validate_args(const ToolSchema& schema, const json& args) {
  const std::string where = "tool '" + schema.name + "'";
  if (!args.is_object()) {
    throw SchemaViolation(where + ": arguments must be an object");
  }
  for (const auto& p : schema.params) {
    auto it = args.find(p.name);
    if (it == args.end()) {
      if (p.required) {
        throw SchemaViolation(where + ": missing required argument '" +
                              p.name + "'");
      }
      continue;
    }
    const json& v = *it;
    bool ok = (p.type == "string" && v.is_string()) ||
              (p.type == "integer" && v.is_number_integer()) ||
              (p.type == "number" && v.is_number()) ||
              (p.type == "boolean" && v.is_boolean()) ||
              (p.type == "array" && v.is_array()) ||
              (p.type == "object" && v.is_object());
    if (!ok) {
      throw SchemaViolation(where + ": argument '" + p.name + "' must be " +
                            p.type);
    }
  }
  for (auto it = args.begin(); it != args.end(); ++it) {
    bool declared = std::any_of(schema.params.begin(), schema.params.end(),
                                [&](const ParamSpec& p) { return p.name == it.key(); });
    if (!declared) {
      throw SchemaViolation(where + ": undeclared argument '" + it.key() + "'");
    }
  }
}

json ToolResult::to_json() const {
  return json{{"tool", tool}, {"status", status}, {"payload", payload}};
}

ToolResult ToolResult::from_json(const json& j) {
  ToolResult r;
  r.tool = require_string<BadFixture>(j, "tool", "tool result");
  r.status = require_string<BadFixture>(j, "status", "tool result");
  r.payload = j.value("payload", json());
  return r;
}

Domain Domain::from_json(const json& fixture) {
  Domain d;
  d.name_ = require_string<BadFixture>(fixture, "name", "fixture");
  d.semantics_ = fixture.value("semantics", d.name_);
  if (d.semantics_ != "airline") {
    throw BadFixture("fixture '" + d.name_ + "': unsupported semantics '" +
                     d.semantics_ + "'");
  }
  d.now_ = require_string<BadFixture>(fixture, "now", "fixture");
  d.agent_guidelines_ = fixture.value("agent_guidelines", std::string());

  std::set<std::string> tool_names;
  for (const json& tj : require_field<BadFixture>(fixture, "tools", "fixture")) {
    ToolSchema t = ToolSchema::from_json(tj);
    if (!tool_names.insert(t.name).second) {
      throw BadFixture("fixture: duplicate tool '" + t.name + "'");
    }
    d.tools_.push_back(std::move(t));
  }
  if (d.tools_.empty()) throw BadFixture("fixture: no tools");

  std::set<std::string> rule_ids;
  for (const json& rj :
       require_field<BadFixture>(fixture, "policy_rules", "fixture")) {
    PolicyRule r;
    r.id = require_string<BadFixture>(rj, "id", "policy rule");
    r.description = rj.value("description", std::string());
    if (!rule_ids.insert(r.id).second) {
      throw BadFixture("fixture: duplicate policy rule '" + r.id + "'");
    }
    d.rules_.push_back(std::move(r));
  }

  d.entities_ = require_field<BadFixture>(fixture, "entities", "fixture");
  for (const char* table : {"users", "flights", "reservations"}) {
    if (!d.entities_.contains(table) || !d.entities_[table].is_object()) {
      throw BadFixture(std::string("fixture: entities must contain object '") +
                       table + "'");
    }
  }
  // Referential integrity: reservations point at real users and flights.
  const json& users = d.entities_["users"];
  const json& flights = d.entities_["flights"];
  for (const auto& [rid, res] : d.entities_["reservations"].items()) {
    std::string uid = require_string<BadFixture>(res, "user_id", rid);
    if (!users.contains(uid)) {
      throw BadFixture("fixture: " + rid + " references unknown user " + uid);
    }
    for (const json& seg : require_field<BadFixture>(res, "flights", rid)) {
      std::string fid = require_string<BadFixture>(seg, "flight_id", rid);
      std::string date = require_string<BadFixture>(seg, "date", rid);
      if (!flights.contains(fid) || !flights[fid]["dates"].contains(date)) {
        throw BadFixture("fixture: " + rid + " references unknown flight " +
                         fid + " on " + date);
      }
    }
  }
  return d;
}

Domain Domain::load_file(const std::string& path) {
  return from_json(read_json_file(path));
}

Domain Domain::builtin_airline() {
  static const json fixture = json::parse(embedded::airline_domain_json());
  return from_json(fixture);
}

Domain Domain::builtin_toy() {
  static const json fixture = json::parse(embedded::toy_domain_json());
  return from_json(fixture);
}

Domain Domain::named_or_file(const std::string& name_or_path) {
  if (name_or_path == "airline") return builtin_airline();
  if (name_or_path == "toy") return builtin_toy();
  return load_file(name_or_path);
}

bool Domain::has_tool(const std::string& name) const {
  return std::any_of(tools_.begin(), tools_.end(),
                     [&](const ToolSchema& t) { return t.name == name; });
}

const ToolSchema& Domain::tool(const std::string& name) const {
  for (const auto& t : tools_) {
    if (t.name == name) return t;
  }
  throw UnknownTool("unknown tool: " + name);
}

json Domain::tool_schemas_json(Role role) const {
  json out = json::array();
  for (const auto& t : tools_) {
    if (role_allowed(t.allowed, role)) out.push_back(t.to_json());
  }
  return out;
}

std::string Domain::canonical_rule_id(const std::string& id) const {
  std::string candidate = id;
  auto alias = kRuleAliases.find(id);
  if (alias != kRuleAliases.end()) candidate = alias->second;
  for (const auto& r : rules_) {
    if (r.id == candidate) return candidate;
  }
  throw UnknownRule("unknown policy rule: " + id);
}

bool Domain::has_rule(const std::string& id) const {
  try {
    canonical_rule_id(id);
    return true;
  } catch (const UnknownRule&) {
    return false;
  }
}

json Domain::to_json() const {
  json tools = json::array();
  for (const auto& t : tools_) tools.push_back(t.to_json());
  json rules = json::array();
  for (const auto& r : rules_) {
    rules.push_back({{"id", r.id}, {"description", r.description}});
  }
  return json{{"name", name_},          {"semantics", semantics_},
              {"now", now_},            {"agent_guidelines", agent_guidelines_},
              {"tools", tools},         {"policy_rules", rules},
              {"entities", entities_}};
}

}  // namespace duet::env

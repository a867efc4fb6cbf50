#include "duet/policy/scripted.hpp"

#include "duet/embedded.hpp"
#include "duet/jsonl.hpp"

namespace duet::policy {

ScriptedPolicy ScriptedPolicy::from_json(const json& script) {
  const std::string role = require_string<BadConfig>(script, "role", "script");
  std::vector<std::string> lines;
  for (const json& l : require_field<BadConfig>(script, "lines", "script")) {
    if (!l.is_string()) throw BadConfig("script lines must be strings");
    lines.push_back(l.get<std::string>());
  }
  return ScriptedPolicy(env::role_from_name(role), std::move(lines));
}

ScriptedPolicy ScriptedPolicy::load_file(const std::string& path) {
  return from_json(read_json_file(path));
}

ScriptedPolicy ScriptedPolicy::greeting_user() {
  static const json script = json::parse(embedded::greeting_script_json());
  return from_json(script);
}

PolicyOutput ScriptedPolicy::act(const env::Observation&, Rng&) {
  if (next_ >= lines_.size()) {
    throw ScriptExhausted("script for " + std::string(env::role_name(role_)) +
                          " exhausted after " + std::to_string(lines_.size()) +
                          " lines");
  }
  PolicyOutput out;
  out.raw = lines_[next_++];
  out.parsed = parse_output(role_, out.raw);
  return out;
}

}  // namespace duet::policy

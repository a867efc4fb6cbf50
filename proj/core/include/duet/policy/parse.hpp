#pragma once

#include <string>
#include <string_view>

#include "duet/env/env.hpp"
#include "duet/json.hpp"

namespace duet::policy {

// Result of parsing one raw model output. Parsing never throws: anything
// that does not follow the output grammar comes back with ok == false and
// a reason, and the episode driver decides what to do with it.
struct ParsedAction {
  bool ok = false;
  std::string think;  // contents of the optional <think> span
  env::ActionPayload payload = env::Empty{};
  std::string error;  // set when !ok

  json to_json() const;
  static ParsedAction from_json(const json& j);
};

// Agent grammar: optional <think>...</think>, then exactly one of
// <function>{"name", "arguments"}</function> or <message>...</message>.
// Never both, nothing outside the tags.
ParsedAction parse_agent_output(std::string_view raw);

// User grammar: optional <think>...</think>, then <answer>...</answer> or
// (dual control) <function>...</function>. Answers may end with one
// control marker: ###STOP###, ###TRANSFER### or ###OUT-OF-SCOPE###; if
// several appear, the strongest wins and all are stripped from the text.
ParsedAction parse_user_output(std::string_view raw);

ParsedAction parse_output(env::Role role, std::string_view raw);

// Inverse of the parsers: produce the tagged surface form. Round trip:
// parse_output(role, render_action(role, p, think)) reproduces p.
std::string render_action(env::Role role, const env::ActionPayload& payload,
                          std::string_view think = "");

// Chat-protocol rendering of an observation: a system message carrying the
// role-local task context, tool menu and format rules, followed by the
// visible history mapped onto assistant/user/tool messages.
json render_chat_messages(const env::Observation& obs,
                          std::string_view extra_system = "");

}  // namespace duet::policy

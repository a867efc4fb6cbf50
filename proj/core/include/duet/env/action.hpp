#pragma once

#include <string>
#include <variant>

#include "duet/errors.hpp"
#include "duet/json.hpp"

namespace duet::env {

enum class Role { agent, user };

inline Role other(Role r) { return r == Role::agent ? Role::user : Role::agent; }
inline const char* role_name(Role r) { return r == Role::agent ? "agent" : "user"; }
inline Role role_from_name(std::string_view s) {
  if (s == "agent") return Role::agent;
  if (s == "user") return Role::user;
  throw ProtocolViolation("unknown role: " + std::string(s));
}

// Conversation control markers a user message may carry. At most one per
// message; any of them ends the episode.
enum class ControlSignal { none, stop, transfer, out_of_scope };

inline const char* signal_name(ControlSignal s) {
  switch (s) {
    case ControlSignal::stop: return "stop";
    case ControlSignal::transfer: return "transfer";
    case ControlSignal::out_of_scope: return "out_of_scope";
    default: return "none";
  }
}

struct ToolCall {
  std::string name;
  json arguments;  // always an object

  bool operator==(const ToolCall& o) const {
    return name == o.name && arguments == o.arguments;
  }
};

struct Message {
  std::string text;
  ControlSignal signal = ControlSignal::none;

  bool operator==(const Message& o) const {
    return text == o.text && signal == o.signal;
  }
};

// The non-acting party contributes an Empty action each turn.
struct Empty {
  bool operator==(const Empty&) const { return true; }
};

using ActionPayload = std::variant<Empty, ToolCall, Message>;

inline bool is_empty(const ActionPayload& p) {
  return std::holds_alternative<Empty>(p);
}

// One joint step of the two-party interaction. Exactly one side acts.
struct JointAction {
  ActionPayload agent;
  ActionPayload user;

  // Which side is acting; throws if neither or both act.
  Role acting_role() const {
    bool a = !is_empty(agent);
    bool u = !is_empty(user);
    if (a == u) {
      throw ProtocolViolation(a ? "both parties acted in one joint action"
                                : "neither party acted in the joint action");
    }
    return a ? Role::agent : Role::user;
  }

  const ActionPayload& acting_payload() const {
    return acting_role() == Role::agent ? agent : user;
  }

  static JointAction by(Role r, ActionPayload p) {
    JointAction j;
    (r == Role::agent ? j.agent : j.user) = std::move(p);
    return j;
  }
};

}  // namespace duet::env

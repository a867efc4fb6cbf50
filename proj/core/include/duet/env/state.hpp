#pragma once

#include <string>

#include "duet/env/action.hpp"
#include "duet/json.hpp"

namespace duet::env {

// Full environment state. `entities` is the domain database (what the
// tools read and write); `interaction_meta` tracks the conversation:
// whose turn it is, the event history, termination, the fixture clock and
// the role-local task context. Everything is JSON so that states
// serialize canonically and can be diffed field by field.
struct EnvState {
  json entities;
  json interaction_meta;

  json to_json() const {
    return json{{"entities", entities}, {"interaction_meta", interaction_meta}};
  }
  static EnvState from_json(const json& j) {
    EnvState s;
    s.entities = require_field<BadFixture>(j, "entities", "state");
    s.interaction_meta =
        require_field<BadFixture>(j, "interaction_meta", "state");
    return s;
  }

  std::string serialize() const { return canonical(to_json()); }

  int turn() const { return interaction_meta.value("turn", 0); }
  bool terminated() const { return interaction_meta.value("terminated", false); }
  std::string termination_reason() const {
    return interaction_meta.value("termination_reason", std::string());
  }
  Role next_speaker() const {
    return role_from_name(
        interaction_meta.value("next_speaker", std::string("user")));
  }
  const json& history() const { return interaction_meta.at("history"); }
};

}  // namespace duet::env

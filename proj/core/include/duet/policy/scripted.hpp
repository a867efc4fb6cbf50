#pragma once

#include <string>
#include <vector>

#include "duet/policy/policy.hpp"

namespace duet::policy {

// Replays a fixed list of raw tagged outputs, one per act() call. Running
// past the end throws ScriptExhausted (the episode driver turns that into
// an error termination).
class ScriptedPolicy : public Policy {
 public:
  ScriptedPolicy(env::Role role, std::vector<std::string> lines)
      : role_(role), lines_(std::move(lines)) {}

  // Script files look like {"role": "user", "lines": ["<answer>..", ...]}.
  static ScriptedPolicy from_json(const json& script);
  static ScriptedPolicy load_file(const std::string& path);
  // The embedded greeting script: a user who asks for one cancellation and
  // stops after the agent's next message.
  static ScriptedPolicy greeting_user();

  env::Role role() const override { return role_; }
  PolicyOutput act(const env::Observation& obs, Rng& rng) override;

  size_t remaining() const { return lines_.size() - next_; }

 private:
  env::Role role_;
  std::vector<std::string> lines_;
  size_t next_ = 0;
};

}  // namespace duet::policy

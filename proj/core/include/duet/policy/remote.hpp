#pragma once

#include <memory>

#include "duet/policy/chat_client.hpp"
#include "duet/policy/policy.hpp"

namespace duet::policy {

// Drives one side of the conversation through a chat-completions
// endpoint: the observation is rendered into a message list, the raw
// completion is parsed with the role's tag grammar. Token-level data is
// not available over this transport, so token_ids/token_logprobs stay
// empty and such turns contribute no optimizable tokens downstream.
class RemotePolicy : public Policy {
 public:
  RemotePolicy(env::Role role, ChatConfig config, std::string extra_system = "");

  env::Role role() const override { return role_; }
  PolicyOutput act(const env::Observation& obs, Rng& rng) override;

 private:
  env::Role role_;
  ChatClient client_;
  std::string extra_system_;
};

}  // namespace duet::policy

#pragma once

#include <memory>
#include <string>

#include "duet/json.hpp"
#include "duet/policy/chat_client.hpp"
#include "duet/synth/types.hpp"

namespace duet::synth {

// One chat-completion request from the pipeline. `messages` is the actual
// conversation a live model would answer; `metadata` carries the
// structured facts (set, version, instance, turn, phase) that the
// deterministic mock keys on and a live backend may log or ignore.
struct BackendRequest {
  Worker worker = Worker::planner;
  json messages = json::array();
  json metadata = json::object();
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const BackendRequest& request) = 0;
};

// Speaks to a live chat-completions endpoint. The worker name travels as
// part of the request metadata extra so server-side routing can see it.
class RemoteChatBackend : public ChatBackend {
 public:
  explicit RemoteChatBackend(policy::ChatConfig config);

  std::string complete(const BackendRequest& request) override;

 private:
  policy::ChatClient client_;
};

}  // namespace duet::synth

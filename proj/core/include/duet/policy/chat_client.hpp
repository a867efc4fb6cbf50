#pragma once

#include <string>
#include <vector>

#include "duet/json.hpp"

namespace duet::policy {

struct ChatConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model = "default";
  double temperature = 0.7;
  int timeout_ms = 30000;
  int max_retries = 3;
  // Name of the environment variable that holds the bearer token; empty
  // means no Authorization header.
  std::string api_key_env;

  json to_json() const;
  static ChatConfig from_json(const json& j);
};

// Minimal chat-completions client. Sends {model, messages, temperature}
// plus any extra fields, returns choices[0].message.content. Transport
// or protocol failures are retried with a short backoff and surface as
// RemoteUnavailable once retries are exhausted.
class ChatClient {
 public:
  explicit ChatClient(ChatConfig config);

  std::string complete(const std::vector<json>& messages, const json& extra = json::object()) const;

  const ChatConfig& config() const { return config_; }

 private:
  ChatConfig config_;
  std::string host_;
  int port_;
  bool tls_;
};

}  // namespace duet::policy

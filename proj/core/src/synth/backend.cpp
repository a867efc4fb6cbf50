#include "duet/synth/backend.hpp"

namespace duet::synth {

RemoteChatBackend::RemoteChatBackend(policy::ChatConfig config)
    : client_(std::move(config)) {}

std::string RemoteChatBackend::complete(const BackendRequest& request) {
  std::vector<json> messages;
  for (const json& m : request.messages) messages.push_back(m);
  json extra = json::object();
  extra["metadata"] = request.metadata;
  extra["metadata"]["worker"] = worker_name(request.worker);
  return client_.complete(messages, extra);
}

}  // namespace duet::synth

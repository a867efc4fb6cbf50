#include "duet/policy/remote.hpp"

#include "duet/policy/parse.hpp"

namespace duet::policy {

RemotePolicy::RemotePolicy(env::Role role, ChatConfig config, std::string extra_system)
    : role_(role), client_(std::move(config)), extra_system_(std::move(extra_system)) {}

PolicyOutput RemotePolicy::act(const env::Observation& obs, Rng& rng) {
  (void)rng;  // sampling happens server-side
  PolicyOutput out;
  out.raw = client_.complete(render_chat_messages(obs, extra_system_));
  out.parsed = parse_output(role_, out.raw);
  return out;
}

}  // namespace duet::policy

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "duet/policy/parse.hpp"
#include "duet/rng.hpp"

namespace duet::policy {

// One turn's worth of output from a policy. Local differentiable policies
// fill in token ids and the log-probabilities they were sampled with;
// scripted and remote policies leave both empty.
struct PolicyOutput {
  std::string raw;      // tagged surface form, exactly as produced
  ParsedAction parsed;  // parse of `raw` for the policy's role
  std::vector<int> token_ids;
  std::vector<double> token_logprobs;

  bool has_logprobs() const { return !token_logprobs.empty(); }
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual env::Role role() const = 0;
  // Produce the next output. `rng` is the episode-and-role-local stream;
  // policies must draw randomness only from it.
  virtual PolicyOutput act(const env::Observation& obs, Rng& rng) = 0;
};

// Fresh policy instance per episode (policies may carry per-episode state,
// e.g. a script cursor).
using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

}  // namespace duet::policy

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "duet/env/domain.hpp"
#include "duet/env/task.hpp"
#include "duet/policy/policy.hpp"

namespace duet::policy {

// Token alphabet of the toy policy: one token per domain tool, a "say"
// token (send a message) and an "end" token (finish the turn).
struct ToyVocab {
  std::vector<std::string> tokens;

  static ToyVocab for_domain(const env::Domain& domain);

  size_t size() const { return tokens.size(); }
  int say_token() const { return static_cast<int>(tokens.size()) - 2; }
  int end_token() const { return static_cast<int>(tokens.size()) - 1; }
  // Beginning-of-turn marker used only for feature hashing.
  int bos_token() const { return static_cast<int>(tokens.size()); }
  int id(std::string_view name) const;  // -1 when absent
};

// A table of logits indexed by (context feature, token). Small enough to
// train with plain gradient ascent, big enough to condition on the last
// tool outcome, the last speaker, the turn index and the previous token.
class ToyParams {
 public:
  ToyParams(size_t n_features, size_t vocab_size)
      : n_features_(n_features), vocab_(vocab_size),
        table_(n_features * vocab_size, 0.0) {}

  size_t n_features() const { return n_features_; }
  size_t vocab_size() const { return vocab_; }
  double at(size_t feature, size_t token) const { return table_[feature * vocab_ + token]; }
  double& at(size_t feature, size_t token) { return table_[feature * vocab_ + token]; }
  std::vector<double>& flat() { return table_; }
  const std::vector<double>& flat() const { return table_; }

  json to_json() const;
  static ToyParams from_json(const json& j);

 private:
  size_t n_features_;
  size_t vocab_;
  std::vector<double> table_;
};

// Discrete context summary of an observation, from the acting party's
// point of view.
struct ToyContext {
  int last_status;   // 0 none, 1 ok, 2 error, 3 rejected
  int last_speaker;  // 0 none, 1 agent, 2 user
  int turn;          // capped
};

ToyContext toy_featurize(const env::Observation& obs);

// Feature row for (context, previous token). Deterministic hash into
// [0, n_features).
size_t toy_feature_index(const ToyContext& ctx, int prev_token, size_t n_features);

// Log-probabilities of one table row under softmax; numerically stable.
std::vector<double> toy_row_logprobs(const ToyParams& params, size_t feature);
double toy_token_logprob(const ToyParams& params, size_t feature, int token);

// An autoregressive softmax policy over the toy vocabulary. The first
// sampled token decides the action (tool token => that tool with the
// task-provided canonical arguments; say/end => a message); sampling
// continues until "end" or the per-turn cap, so a turn is a short token
// sequence with recorded per-token log-probabilities.
class ToyPolicy : public Policy {
 public:
  static constexpr int kMaxTokensPerTurn = 3;

  ToyPolicy(std::shared_ptr<const ToyParams> params, ToyVocab vocab,
            json tool_arguments, std::string say_text = "Done. Anything else I can help with?");

  // Convenience: vocabulary from the domain, arguments from the task's
  // selected_parameters.tool_arguments object.
  static std::unique_ptr<ToyPolicy> for_task(std::shared_ptr<const ToyParams> params,
                                             const env::Domain& domain,
                                             const env::TaskSpec& task);

  env::Role role() const override { return env::Role::agent; }
  PolicyOutput act(const env::Observation& obs, Rng& rng) override;

  const ToyVocab& vocab() const { return vocab_; }

 private:
  std::shared_ptr<const ToyParams> params_;
  ToyVocab vocab_;
  json tool_arguments_;
  std::string say_text_;
};

// Default feature-table width used across the toy training stack.
inline constexpr size_t kToyFeatureCount = 256;

}  // namespace duet::policy

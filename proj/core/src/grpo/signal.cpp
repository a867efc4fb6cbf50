#include "duet/grpo/signal.hpp"

#include <algorithm>
#include <cmath>

#include "duet/errors.hpp"
#include "duet/jsonl.hpp"

namespace duet::grpo {

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2) {
    throw DegenerateGroup("a group needs at least two rollouts to compare");
  }
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(rewards.size());
  if (var == 0.0) {
    throw DegenerateGroup("all rewards in the group are equal; no relative signal");
  }
  const double std_dev = std::sqrt(var);
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / std_dev);
  return out;
}

FilterResult dynamic_filter(const std::vector<std::vector<double>>& group_rewards) {
  FilterResult result;
  for (size_t g = 0; g < group_rewards.size(); ++g) {
    const auto& rewards = group_rewards[g];
    const bool mixed =
        !rewards.empty() &&
        std::any_of(rewards.begin(), rewards.end(),
                    [&](double r) { return r != rewards.front(); });
    (mixed ? result.retained : result.dropped).push_back(g);
  }
  return result;
}

double clipped_surrogate(double logprob_new, double logprob_old, double advantage,
                         double epsilon) {
  const double ratio = std::exp(logprob_new - logprob_old);
  const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

bool surrogate_gradient_active(double ratio, double advantage, double epsilon) {
  if (advantage > 0.0) return ratio <= 1.0 + epsilon;
  if (advantage < 0.0) return ratio >= 1.0 - epsilon;
  return false;  // zero advantage moves nothing either way
}

json TokenRecord::to_json() const {
  return json{{"trajectory", trajectory},   {"turn", turn},
              {"position", position},       {"token_id", token_id},
              {"feature", feature},         {"old_logprob", old_logprob},
              {"advantage", advantage}};
}

double batch_objective(const policy::ToyParams& params, const std::vector<TokenBatch>& batches,
                       double epsilon) {
  if (batches.empty()) return 0.0;
  double total = 0.0;
  for (const TokenBatch& batch : batches) {
    if (batch.group_token_total == 0) continue;
    double group_sum = 0.0;
    for (const TokenRecord& token : batch.tokens) {
      const double lp = policy::toy_token_logprob(params, token.feature, token.token_id);
      group_sum += clipped_surrogate(lp, token.old_logprob, token.advantage, epsilon);
    }
    total += group_sum / static_cast<double>(batch.group_token_total);
  }
  return total / static_cast<double>(batches.size());
}

void batch_gradient(const policy::ToyParams& params, const std::vector<TokenBatch>& batches,
                    double epsilon, std::vector<double>& grad) {
  grad.assign(params.flat().size(), 0.0);
  if (batches.empty()) return;
  const size_t vocab = params.vocab_size();
  const double inv_batches = 1.0 / static_cast<double>(batches.size());
  for (const TokenBatch& batch : batches) {
    if (batch.group_token_total == 0) continue;
    const double scale = inv_batches / static_cast<double>(batch.group_token_total);
    for (const TokenRecord& token : batch.tokens) {
      const auto logprobs = policy::toy_row_logprobs(params, token.feature);
      const double ratio =
          std::exp(logprobs[static_cast<size_t>(token.token_id)] - token.old_logprob);
      if (!surrogate_gradient_active(ratio, token.advantage, epsilon)) continue;
      const double coeff = scale * ratio * token.advantage;
      double* row = grad.data() + token.feature * vocab;
      for (size_t t = 0; t < vocab; ++t) {
        const double indicator = t == static_cast<size_t>(token.token_id) ? 1.0 : 0.0;
        row[t] += coeff * (indicator - std::exp(logprobs[t]));
      }
    }
  }
}

void export_training_signal(const std::string& path, const std::vector<TokenBatch>& batches) {
  std::vector<json> rows;
  for (size_t g = 0; g < batches.size(); ++g) {
    for (const TokenRecord& token : batches[g].tokens) {
      json row = token.to_json();
      row["group"] = g;
      row["group_token_total"] = batches[g].group_token_total;
      rows.push_back(std::move(row));
    }
  }
  write_jsonl_file(path, rows);
}

}  // namespace duet::grpo

#pragma once

#include <cstddef>
#include <vector>

#include "duet/json.hpp"
#include "duet/policy/toy.hpp"

namespace duet::grpo {

// Group-relative advantages: for rewards R_1..R_G of one task group,
// A_i = (R_i - mean) / std with the population standard deviation and no
// variance floor. Requires G >= 2; a group whose rewards are all equal has
// no usable signal and throws DegenerateGroup (dynamic filtering is
// supposed to remove such groups before this point).
std::vector<double> group_advantages(const std::vector<double>& rewards);

// Splits group indices into retained (mixed-reward) and dropped
// (all-equal) sets. The retained set is what a filtered batch trains on.
struct FilterResult {
  std::vector<size_t> retained;
  std::vector<size_t> dropped;
};
FilterResult dynamic_filter(const std::vector<std::vector<double>>& group_rewards);

// Token-level clipped surrogate. ratio = exp(logprob_new - logprob_old);
// value = min(ratio * A, clip(ratio, 1-eps, 1+eps) * A).
double clipped_surrogate(double logprob_new, double logprob_old, double advantage,
                         double epsilon);

// Whether the surrogate's gradient flows through logprob_new at this
// point: it vanishes exactly when the ratio sits strictly outside the clip
// range on the side the advantage pushes toward (the min picks the
// constant clipped branch). Ties at the boundary keep the gradient.
bool surrogate_gradient_active(double ratio, double advantage, double epsilon);

// One optimizable token: where it sits (trajectory/turn/position), which
// table row produced it, and the sampling-time log-probability.
struct TokenRecord {
  int trajectory = 0;
  int turn = 0;
  int position = 0;
  int token_id = 0;
  size_t feature = 0;
  double old_logprob = 0.0;
  double advantage = 0.0;

  json to_json() const;
};

// All optimizable tokens of one retained task group. group_token_total is
// the group's N_G — the sum of agent tokens across the group's
// trajectories — which normalizes every token of the group equally
// regardless of trajectory length.
struct TokenBatch {
  std::vector<TokenRecord> tokens;
  size_t group_token_total = 0;
};

// J(theta) = (1/|B|) * sum_groups (1/N_G) * sum_tokens surrogate(token).
// Empty batches (or batches with zero tokens) contribute nothing but stay
// in the 1/|B| denominator — exactly the dilution that dynamic filtering
// is there to avoid.
double batch_objective(const policy::ToyParams& params, const std::vector<TokenBatch>& batches,
                       double epsilon);

// Analytic gradient of batch_objective with respect to every table entry,
// accumulated into grad (same layout as params.flat(); zeroed first).
// d surrogate / d theta[f,t] = ratio * A * (1{t == token} - softmax_f[t])
// for active tokens, 0 for clipped ones.
void batch_gradient(const policy::ToyParams& params, const std::vector<TokenBatch>& batches,
                    double epsilon, std::vector<double>& grad);

// One line per token: enough to reconstruct or audit the update offline.
void export_training_signal(const std::string& path, const std::vector<TokenBatch>& batches);

}  // namespace duet::grpo

#pragma once

#include "duet/env/env.hpp"
#include "duet/env/task.hpp"
#include "duet/grpo/signal.hpp"
#include "duet/rollout/group.hpp"

namespace duet::grpo {

struct TrainConfig {
  int iterations = 300;
  int groups_per_iteration = 4;
  int group_size = 8;
  double learning_rate = 40.0;
  double epsilon = 0.2;       // clip half-width
  int inner_steps = 2;        // gradient steps per sampled batch
  bool dynamic_filter_enabled = true;
  uint64_t seed = 0;
  int max_records = 16;       // per-episode turn cap
  int worker_cap = 1;         // rollout threads (results identical regardless)
  // Early stop: quit once the mean reward of `stop_window` consecutive
  // iterations reaches this bar. 0 disables (fixed-length runs for
  // apples-to-apples ablations).
  double stop_at_mean = 0.0;
  int stop_window = 3;

  json to_json() const;
};

struct IterationStat {
  int iteration = 0;
  double mean_reward = 0.0;  // across every episode sampled this iteration
  int groups_retained = 0;
  double objective = 0.0;    // batch objective before the update

  json to_json() const;
};

struct TrainResult {
  policy::ToyParams params{policy::kToyFeatureCount, 0};
  std::vector<IterationStat> curve;

  // Highest windowed mean reward anywhere on the curve.
  double best_window_mean(int window) const;
  // Mean reward over the final `window` iterations.
  double final_window_mean(int window) const;
  // First iteration whose trailing `window` mean reaches `bar`; -1 never.
  int first_iteration_reaching(double bar, int window) const;
};

// On-policy RL on the toy softmax policy against a verified task: sample
// task groups, score them by replay-based verification, normalize rewards
// within each group, and ascend the clipped token objective. With the
// dynamic filter enabled, all-equal-reward groups are dropped from the
// batch; disabled, they stay with zero advantages and dilute the update.
TrainResult train_toy(const env::Environment& environment, const env::TaskSpec& task,
                      const TrainConfig& config);

// Reconstructs the optimizable tokens of one trajectory: walks the episode
// through the environment exactly as the toy policy saw it, recomputing
// each token's feature row, and stamps every token with the trajectory's
// group-relative advantage.
void collect_toy_tokens(const env::Environment& environment, const env::TaskSpec& task,
                        const rollout::Trajectory& trajectory, int trajectory_index,
                        double advantage, const policy::ToyVocab& vocab, size_t n_features,
                        std::vector<TokenRecord>& out);

// Mean verified reward of a frozen parameter table over `episodes` seeds
// derived from `seed`. Used to measure a policy outside the training loop
// (e.g. the uniform init, or a trained table reloaded from disk).
double evaluate_toy_policy(const env::Environment& environment, const env::TaskSpec& task,
                           const policy::ToyParams& params, int episodes, uint64_t seed,
                           int max_records = 16, int worker_cap = 1);

void write_curve_csv(const std::string& path, const std::vector<IterationStat>& curve);

}  // namespace duet::grpo

#include "duet/grpo/train.hpp"

#include <memory>

#include "duet/errors.hpp"
#include "duet/jsonl.hpp"
#include "duet/policy/scripted.hpp"
#include "duet/verify/verify.hpp"

namespace duet::grpo {

json TrainConfig::to_json() const {
  return json{{"iterations", iterations},
              {"groups_per_iteration", groups_per_iteration},
              {"group_size", group_size},
              {"learning_rate", learning_rate},
              {"epsilon", epsilon},
              {"inner_steps", inner_steps},
              {"dynamic_filter_enabled", dynamic_filter_enabled},
              {"seed", seed},
              {"max_records", max_records},
              {"worker_cap", worker_cap},
              {"stop_at_mean", stop_at_mean},
              {"stop_window", stop_window}};
}

json IterationStat::to_json() const {
  return json{{"iteration", iteration},
              {"mean_reward", mean_reward},
              {"groups_retained", groups_retained},
              {"objective", objective}};
}

double TrainResult::best_window_mean(int window) const {
  double best = 0.0;
  for (size_t i = 0; i + static_cast<size_t>(window) <= curve.size(); ++i) {
    double sum = 0.0;
    for (int k = 0; k < window; ++k) sum += curve[i + static_cast<size_t>(k)].mean_reward;
    best = std::max(best, sum / window);
  }
  return best;
}

double TrainResult::final_window_mean(int window) const {
  if (curve.empty()) return 0.0;
  const size_t n = std::min(curve.size(), static_cast<size_t>(window));
  double sum = 0.0;
  for (size_t i = curve.size() - n; i < curve.size(); ++i) sum += curve[i].mean_reward;
  return sum / static_cast<double>(n);
}

int TrainResult::first_iteration_reaching(double bar, int window) const {
  for (size_t i = 0; i + static_cast<size_t>(window) <= curve.size(); ++i) {
    double sum = 0.0;
    for (int k = 0; k < window; ++k) sum += curve[i + static_cast<size_t>(k)].mean_reward;
    if (sum / window >= bar) return curve[i + static_cast<size_t>(window) - 1].iteration;
  }
  return -1;
}

void collect_toy_tokens(const env::Environment& environment, const env::TaskSpec& task,
                        const rollout::Trajectory& trajectory, int trajectory_index,
                        double advantage, const policy::ToyVocab& vocab, size_t n_features,
                        std::vector<TokenRecord>& out) {
  env::EnvState state = environment.reset(task);
  for (const rollout::TurnRecord& turn : trajectory.turns) {
    if (turn.actor == env::Role::agent && turn.token_count() > 0) {
      if (turn.token_ids.size() != turn.token_logprobs.size()) {
        throw BadConfig("trajectory turn has mismatched token/logprob lengths");
      }
      const policy::ToyContext ctx =
          policy::toy_featurize(environment.observe(state, env::Role::agent));
      int prev = vocab.bos_token();
      for (size_t pos = 0; pos < turn.token_ids.size(); ++pos) {
        TokenRecord record;
        record.trajectory = trajectory_index;
        record.turn = turn.index;
        record.position = static_cast<int>(pos);
        record.token_id = turn.token_ids[pos];
        record.feature = policy::toy_feature_index(ctx, prev, n_features);
        record.old_logprob = turn.token_logprobs[pos];
        record.advantage = advantage;
        out.push_back(record);
        prev = turn.token_ids[pos];
      }
    }
    state = environment
                .apply(state, env::JointAction::by(turn.actor, rollout::effective_payload(turn)))
                .state;
  }
}

TrainResult train_toy(const env::Environment& environment, const env::TaskSpec& task,
                      const TrainConfig& config) {
  const policy::ToyVocab vocab = policy::ToyVocab::for_domain(environment.domain());
  TrainResult result;
  result.params = policy::ToyParams(policy::kToyFeatureCount, vocab.size());

  rollout::GroupOptions group_options;
  group_options.group_size = config.group_size;
  group_options.worker_cap = config.worker_cap;
  group_options.episode.max_records = config.max_records;
  group_options.episode.scorer = verify::make_scorer(environment, task);

  std::vector<double> grad;
  for (int iteration = 0; iteration < config.iterations; ++iteration) {
    // Policies snapshot the parameters for the whole sampling phase.
    auto snapshot = std::make_shared<const policy::ToyParams>(result.params);
    policy::PolicyFactory make_agent = [&] {
      return policy::ToyPolicy::for_task(snapshot, environment.domain(), task);
    };
    policy::PolicyFactory make_user = [] {
      return std::make_unique<policy::ScriptedPolicy>(policy::ScriptedPolicy::greeting_user());
    };

    std::vector<std::vector<rollout::EpisodeResult>> groups;
    std::vector<std::vector<double>> group_rewards;
    double reward_sum = 0.0;
    int episode_count = 0;
    for (int g = 0; g < config.groups_per_iteration; ++g) {
      group_options.base_seed = hash_mix(
          config.seed, static_cast<uint64_t>(iteration) *
                               static_cast<uint64_t>(config.groups_per_iteration) +
                           static_cast<uint64_t>(g));
      groups.push_back(
          sample_group(environment, task, make_agent, make_user, group_options));
      std::vector<double> rewards;
      for (const auto& episode : groups.back()) {
        rewards.push_back(episode.trajectory.reward);
        reward_sum += episode.trajectory.reward;
        ++episode_count;
      }
      group_rewards.push_back(std::move(rewards));
    }

    // Group selection: with the filter, all-equal groups vanish from the
    // batch; without it they stay with zero advantage everywhere.
    std::vector<TokenBatch> batches;
    int retained = 0;
    for (size_t g = 0; g < groups.size(); ++g) {
      std::vector<double> advantages;
      bool degenerate = false;
      try {
        advantages = group_advantages(group_rewards[g]);
      } catch (const DegenerateGroup&) {
        degenerate = true;
      }
      if (degenerate) {
        if (config.dynamic_filter_enabled) continue;
        advantages.assign(group_rewards[g].size(), 0.0);
      } else {
        ++retained;
      }
      TokenBatch batch;
      for (size_t i = 0; i < groups[g].size(); ++i) {
        const rollout::Trajectory& trajectory = groups[g][i].trajectory;
        batch.group_token_total += trajectory.agent_token_total();
        collect_toy_tokens(environment, task, trajectory, static_cast<int>(i),
                           advantages[i], vocab, result.params.n_features(), batch.tokens);
      }
      batches.push_back(std::move(batch));
    }

    IterationStat stat;
    stat.iteration = iteration;
    stat.mean_reward = episode_count == 0 ? 0.0 : reward_sum / episode_count;
    stat.groups_retained = retained;
    stat.objective = batch_objective(result.params, batches, config.epsilon);
    result.curve.push_back(stat);

    for (int step = 0; step < config.inner_steps; ++step) {
      batch_gradient(result.params, batches, config.epsilon, grad);
      for (size_t i = 0; i < grad.size(); ++i) {
        result.params.flat()[i] += config.learning_rate * grad[i];
      }
    }

    if (config.stop_at_mean > 0.0 &&
        static_cast<int>(result.curve.size()) >= config.stop_window) {
      double sum = 0.0;
      for (int k = 0; k < config.stop_window; ++k) {
        sum += result.curve[result.curve.size() - 1 - static_cast<size_t>(k)].mean_reward;
      }
      if (sum / config.stop_window >= config.stop_at_mean) break;
    }
  }
  return result;
}

double evaluate_toy_policy(const env::Environment& environment, const env::TaskSpec& task,
                           const policy::ToyParams& params, int episodes, uint64_t seed,
                           int max_records, int worker_cap) {
  if (episodes <= 0) throw BadConfig("evaluate_toy_policy needs episodes > 0");
  auto frozen = std::make_shared<const policy::ToyParams>(params);
  policy::PolicyFactory make_agent = [&] {
    return policy::ToyPolicy::for_task(frozen, environment.domain(), task);
  };
  policy::PolicyFactory make_user = [] {
    return std::make_unique<policy::ScriptedPolicy>(policy::ScriptedPolicy::greeting_user());
  };
  rollout::GroupOptions options;
  options.group_size = episodes;
  options.base_seed = seed;
  options.worker_cap = worker_cap;
  options.episode.max_records = max_records;
  options.episode.scorer = verify::make_scorer(environment, task);
  const auto results = sample_group(environment, task, make_agent, make_user, options);
  double sum = 0.0;
  for (const auto& episode : results) sum += episode.trajectory.reward;
  return sum / static_cast<double>(results.size());
}

void write_curve_csv(const std::string& path, const std::vector<IterationStat>& curve) {
  std::string body = "iteration,mean_reward,groups_retained,objective\n";
  for (const IterationStat& stat : curve) {
    body += std::to_string(stat.iteration) + "," + std::to_string(stat.mean_reward) + "," +
            std::to_string(stat.groups_retained) + "," + std::to_string(stat.objective) +
            "\n";
  }
  write_text_file(path, body);
}

}  // namespace duet::grpo

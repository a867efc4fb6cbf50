#include <benchmark/benchmark.h>

#include "duet/bench/metrics.hpp"
#include "duet/env/env.hpp"
#include "duet/grpo/signal.hpp"
#include "duet/policy/scripted.hpp"
#include "duet/policy/toy.hpp"
#include "duet/rollout/episode.hpp"
#include "duet/verify/checker_spec.hpp"
#include "duet/verify/verify.hpp"

using namespace duet;

namespace {

// Full-database comparison with a single planted difference — the hot path
// of every verification call.
void bm_deep_compare(benchmark::State& state) {
  env::Domain domain = env::Domain::builtin_airline();
  json expected = domain.initial_entities();
  json actual = expected;
  actual["reservations"]["RES003"]["status"] = "cancelled";
  verify::CheckerSpec spec;
  for (auto _ : state) {
    auto result = verify::deep_compare(expected, actual, spec);
    benchmark::DoNotOptimize(result.fraction);
  }
}
BENCHMARK(bm_deep_compare);

void bm_group_advantages(benchmark::State& state) {
  std::vector<double> rewards;
  Rng rng(7);
  for (int i = 0; i < static_cast<int>(state.range(0)); ++i) {
    rewards.push_back(rng.below(2) ? 1.0 : 0.0);
  }
  for (auto _ : state) {
    auto advantages = grpo::group_advantages(rewards);
    benchmark::DoNotOptimize(advantages.data());
  }
}
BENCHMARK(bm_group_advantages)->Arg(8)->Arg(64);

// One complete seeded episode: uniform toy agent vs the scripted user,
// including verification-grade state evolution.
void bm_toy_episode(benchmark::State& state) {
  env::Environment environment(env::Domain::builtin_toy());
  env::TaskSpec task = env::builtin_toy_cancel_task();
  const policy::ToyVocab vocab = policy::ToyVocab::for_domain(environment.domain());
  auto params = std::make_shared<const policy::ToyParams>(
      policy::ToyParams(policy::kToyFeatureCount, vocab.size()));
  uint64_t seed = 0;
  for (auto _ : state) {
    auto agent = policy::ToyPolicy::for_task(params, environment.domain(), task);
    policy::ScriptedPolicy user = policy::ScriptedPolicy::greeting_user();
    rollout::EpisodeOptions options;
    options.seed = ++seed;
    options.max_records = 16;
    auto result = rollout::run_episode(environment, task, *agent, user, options);
    benchmark::DoNotOptimize(result.trajectory.turns.size());
  }
}
BENCHMARK(bm_toy_episode);

void bm_episode_with_verification(benchmark::State& state) {
  env::Environment environment(env::Domain::builtin_toy());
  env::TaskSpec task = env::builtin_toy_cancel_task();
  const policy::ToyVocab vocab = policy::ToyVocab::for_domain(environment.domain());
  auto params = std::make_shared<const policy::ToyParams>(
      policy::ToyParams(policy::kToyFeatureCount, vocab.size()));
  uint64_t seed = 0;
  for (auto _ : state) {
    auto agent = policy::ToyPolicy::for_task(params, environment.domain(), task);
    policy::ScriptedPolicy user = policy::ScriptedPolicy::greeting_user();
    rollout::EpisodeOptions options;
    options.seed = ++seed;
    options.max_records = 16;
    options.scorer = verify::make_scorer(environment, task);
    auto result = rollout::run_episode(environment, task, *agent, user, options);
    benchmark::DoNotOptimize(result.trajectory.reward);
  }
}
BENCHMARK(bm_episode_with_verification);

void bm_pass_hat_k(benchmark::State& state) {
  for (auto _ : state) {
    double acc = 0.0;
    for (int n = 1; n <= 32; ++n) {
      for (int c = 0; c <= n; ++c) {
        for (int k = 1; k <= n; ++k) acc += bench::pass_hat_k(n, c, k);
      }
    }
    benchmark::DoNotOptimize(acc);
  }
}
BENCHMARK(bm_pass_hat_k);

void bm_canonical_state(benchmark::State& state) {
  env::Domain domain = env::Domain::builtin_airline();
  const json& entities = domain.initial_entities();
  for (auto _ : state) {
    std::string bytes = canonical(entities);
    benchmark::DoNotOptimize(bytes.size());
  }
}
BENCHMARK(bm_canonical_state);

}  // namespace

BENCHMARK_MAIN();

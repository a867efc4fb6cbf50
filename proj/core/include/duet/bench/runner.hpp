#pragma once

#include <string>
#include <vector>

#include "duet/bench/metrics.hpp"
#include "duet/env/env.hpp"
#include "duet/json.hpp"
#include "duet/policy/policy.hpp"

namespace duet::bench {

struct BenchmarkConfig {
  int n_trials = 4;              // episodes per task
  std::vector<int> ks = {1, 2, 4};
  uint64_t seed = 0;
  int worker_cap = 1;            // threads per task's trial group
  int max_records = 40;
  int retry_count = 0;           // same-seed reruns after "error" terminations
};

struct TaskTrialRow {
  std::string task_id;
  std::vector<double> rewards;  // one per trial, in seed order

  int successes() const;  // trials with reward exactly 1.0
};

struct EvalReport {
  int n_trials = 0;
  std::vector<int> ks;
  std::vector<TaskTrialRow> rows;

  TrialMatrix matrix() const;
  json to_json() const;
  std::string table() const;  // fixed-width text summary
};

// Runs n_trials verified episodes per task (trial t of a task uses seed
// hash_mix(hash_mix(config.seed, task.id), t), so rows are independent of
// task order and worker count) and aggregates the consistency/coverage
// metrics for each requested k. Tasks must carry a checker spec; every k
// must lie in [1, n_trials].
EvalReport run_benchmark(const env::Environment& environment,
                         const std::vector<env::TaskSpec>& tasks,
                         const policy::PolicyFactory& make_agent,
                         const policy::PolicyFactory& make_user,
                         const BenchmarkConfig& config);

}  // namespace duet::bench

#include "duet/bench/runner.hpp"

#include <algorithm>
#include <cstdio>

#include "duet/errors.hpp"
#include "duet/rng.hpp"
#include "duet/rollout/group.hpp"
#include "duet/verify/verify.hpp"

namespace duet::bench {

int TaskTrialRow::successes() const {
  return static_cast<int>(std::count(rewards.begin(), rewards.end(), 1.0));
}

TrialMatrix EvalReport::matrix() const {
  TrialMatrix m;
  for (const auto& row : rows) {
    for (double r : row.rewards) m.record(row.task_id, r == 1.0);
  }
  return m;
}

json EvalReport::to_json() const {
  json out;
  out["n_trials"] = n_trials;
  out["ks"] = ks;
  out["tasks"] = json::array();
  for (const auto& row : rows) {
    json t;
    t["task_id"] = row.task_id;
    t["rewards"] = row.rewards;
    t["successes"] = row.successes();
    out["tasks"].push_back(std::move(t));
  }
  TrialMatrix m = matrix();
  json consistency = json::object();
  json coverage = json::object();
  for (int k : ks) {
    consistency[std::to_string(k)] = mean_pass_hat_k(m, k);
    coverage[std::to_string(k)] = mean_pass_at_k(m, k);
  }
  out["pass_hat_k"] = std::move(consistency);
  out["pass_at_k"] = std::move(coverage);
  return out;
}

std::string EvalReport::table() const {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "%-28s %8s %10s\n", "task", "n", "successes");
  out += line;
  out += std::string(48, '-') + "\n";
  for (const auto& row : rows) {
    std::snprintf(line, sizeof(line), "%-28s %8zu %10d\n", row.task_id.c_str(),
                  row.rewards.size(), row.successes());
    out += line;
  }
  TrialMatrix m = matrix();
  out += "\n";
  std::snprintf(line, sizeof(line), "%-8s %14s %14s\n", "k", "pass^k", "pass@k");
  out += line;
  for (int k : ks) {
    std::snprintf(line, sizeof(line), "%-8d %14.4f %14.4f\n", k, mean_pass_hat_k(m, k),
                  mean_pass_at_k(m, k));
    out += line;
  }
  return out;
}

EvalReport run_benchmark(const env::Environment& environment,
                         const std::vector<env::TaskSpec>& tasks,
                         const policy::PolicyFactory& make_agent,
                         const policy::PolicyFactory& make_user,
                         const BenchmarkConfig& config) {
  if (tasks.empty()) throw BadConfig("run_benchmark: no tasks");
  if (config.n_trials <= 0) {
    throw BadConfig("run_benchmark: n_trials must be positive, got " +
                    std::to_string(config.n_trials));
  }
  if (config.ks.empty()) throw BadConfig("run_benchmark: no ks requested");
  for (int k : config.ks) {
    if (k <= 0 || k > config.n_trials) {
      throw BadConfig("run_benchmark: k=" + std::to_string(k) + " outside [1, n_trials=" +
                      std::to_string(config.n_trials) + "]");
    }
  }
  for (const auto& task : tasks) {
    if (!task.checker_spec) {
      throw BadConfig("run_benchmark: task " + task.id + " has no checker spec");
    }
  }

  EvalReport report;
  report.n_trials = config.n_trials;
  report.ks = config.ks;
  for (const auto& task : tasks) {
    rollout::GroupOptions options;
    options.group_size = config.n_trials;
    options.base_seed = hash_mix(config.seed, task.id);
    options.worker_cap = config.worker_cap;
    options.retry_count = config.retry_count;
    options.episode.max_records = config.max_records;
    options.episode.scorer = verify::make_scorer(environment, task);

    auto episodes = rollout::sample_group(environment, task, make_agent, make_user, options);
    TaskTrialRow row;
    row.task_id = task.id;
    row.rewards.reserve(episodes.size());
    for (const auto& ep : episodes) row.rewards.push_back(ep.trajectory.reward);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace duet::bench

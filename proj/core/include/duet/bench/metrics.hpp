#pragma once

#include <map>
#include <string>
#include <vector>

namespace duet::bench {

// Reliability metrics over repeated trials of the same task.
//
// pass_hat_k(n, c, k): probability that k trials drawn uniformly WITHOUT
// replacement from the n recorded trials (c successes) all pass — the
// consistency measure; it punishes flaky policies. Computed as the exact
// product prod_{i<k} (c-i)/(n-i).
//
// pass_at_k(n, c, k): probability that at least one of the k drawn trials
// passes — the coverage measure. Computed as 1 - prod_{i<k} (n-c-i)/(n-i),
// the stable form of 1 - C(n-c,k)/C(n,k).
//
// Both throw BadConfig when k is outside [1, n] or c outside [0, n].
double pass_hat_k(int n, int c, int k);
double pass_at_k(int n, int c, int k);

// Per-task trial outcomes, in recorded order.
class TrialMatrix {
 public:
  void record(const std::string& task_id, bool success);

  const std::vector<std::string>& tasks() const { return order_; }
  const std::vector<bool>& outcomes(const std::string& task_id) const;
  int trials(const std::string& task_id) const;
  int successes(const std::string& task_id) const;
  bool empty() const { return order_.empty(); }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::vector<bool>> outcomes_;
};

// Task-averaged metrics. Every task must have recorded at least k trials.
double mean_pass_hat_k(const TrialMatrix& matrix, int k);
double mean_pass_at_k(const TrialMatrix& matrix, int k);

// Strict partition estimator of the consistency metric: split each task's
// trials, in recorded order, into disjoint blocks of exactly k and count
// the fraction of blocks that pass wholesale. Requires every task's trial
// count to be a multiple of k (BadConfig otherwise). Same expectation as
// pass_hat_k under exchangeable trials, but coarser — kept for runs that
// were laid out as n = m*k by construction.
double partition_pass_hat_k(const TrialMatrix& matrix, int k);

}  // namespace duet::bench

#include "duet/bench/metrics.hpp"

#include <algorithm>

#include "duet/errors.hpp"

namespace duet::bench {
namespace {

void check_counts(int n, int c, int k) {
  if (n <= 0) throw BadConfig("metrics: trial count must be positive, got " + std::to_string(n));
  if (c < 0 || c > n) {
    throw BadConfig("metrics: success count " + std::to_string(c) + " outside [0, " +
                    std::to_string(n) + "]");
  }
  if (k <= 0 || k > n) {
    throw BadConfig("metrics: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
}

}  // namespace

double pass_hat_k(int n, int c, int k) {
  check_counts(n, c, k);
  // prod_{i<k} (c-i)/(n-i); once a factor hits zero the product is zero.
  double p = 1.0;
  for (int i = 0; i < k; ++i) {
    if (c - i <= 0) return 0.0;
    p *= static_cast<double>(c - i) / static_cast<double>(n - i);
  }
  return p;
}

double pass_at_k(int n, int c, int k) {
  check_counts(n, c, k);
  // 1 - prod_{i<k} (n-c-i)/(n-i): complement of "all k draws fail".
  double q = 1.0;
  for (int i = 0; i < k; ++i) {
    if (n - c - i <= 0) return 1.0;
    q *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
  }
  return 1.0 - q;
}

void TrialMatrix::record(const std::string& task_id, bool success) {
  auto it = outcomes_.find(task_id);
  if (it == outcomes_.end()) {
    order_.push_back(task_id);
    it = outcomes_.emplace(task_id, std::vector<bool>{}).first;
  }
  it->second.push_back(success);
}

const std::vector<bool>& TrialMatrix::outcomes(const std::string& task_id) const {
  auto it = outcomes_.find(task_id);
  if (it == outcomes_.end()) throw BadConfig("metrics: no trials recorded for task " + task_id);
  return it->second;
}

int TrialMatrix::trials(const std::string& task_id) const {
  return static_cast<int>(outcomes(task_id).size());
}

int TrialMatrix::successes(const std::string& task_id) const {
  const auto& row = outcomes(task_id);
  return static_cast<int>(std::count(row.begin(), row.end(), true));
}

namespace {

double mean_over_tasks(const TrialMatrix& matrix, int k, double (*metric)(int, int, int)) {
  if (matrix.empty()) throw BadConfig("metrics: empty trial matrix");
  double sum = 0.0;
  for (const auto& task : matrix.tasks()) {
    sum += metric(matrix.trials(task), matrix.successes(task), k);
  }
  return sum / static_cast<double>(matrix.tasks().size());
}

}  // namespace

double mean_pass_hat_k(const TrialMatrix& matrix, int k) {
  return mean_over_tasks(matrix, k, pass_hat_k);
}

double mean_pass_at_k(const TrialMatrix& matrix, int k) {
  return mean_over_tasks(matrix, k, pass_at_k);
}

double partition_pass_hat_k(const TrialMatrix& matrix, int k) {
  if (matrix.empty()) throw BadConfig("metrics: empty trial matrix");
  if (k <= 0) throw BadConfig("metrics: k=" + std::to_string(k) + " must be positive");
  double sum = 0.0;
  for (const auto& task : matrix.tasks()) {
    const auto& row = matrix.outcomes(task);
    int n = static_cast<int>(row.size());
    if (n == 0 || n % k != 0) {
      throw BadConfig("metrics: task " + task + " has " + std::to_string(n) +
                      " trials, not a positive multiple of k=" + std::to_string(k));
    }
    int blocks = n / k;
    int full = 0;
    for (int b = 0; b < blocks; ++b) {
      bool all = true;
      for (int i = 0; i < k; ++i) all = all && row[b * k + i];
      if (all) ++full;
    }
    sum += static_cast<double>(full) / static_cast<double>(blocks);
  }
  return sum / static_cast<double>(matrix.tasks().size());
}

}  // namespace duet::bench

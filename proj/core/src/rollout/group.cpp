#include "duet/rollout/group.hpp"

#include <atomic>
#include <mutex>
#include <thread>

#include "duet/errors.hpp"

namespace duet::rollout {

std::vector<EpisodeResult> sample_group(const env::Environment& environment,
                                        const env::TaskSpec& task,
                                        const policy::PolicyFactory& make_agent,
                                        const policy::PolicyFactory& make_user,
                                        const GroupOptions& options) {
  if (options.group_size < 1) throw BadConfig("sample_group: group_size must be >= 1");
  const int n = options.group_size;
  std::vector<EpisodeResult> results(static_cast<size_t>(n));

  auto run_slot = [&](int g) {
    EpisodeOptions ep = options.episode;
    ep.seed = hash_mix(options.base_seed, static_cast<uint64_t>(g));
    for (int attempt = 0;; ++attempt) {
      auto agent = make_agent();
      auto user = make_user();
      results[static_cast<size_t>(g)] = run_episode(environment, task, *agent, *user, ep);
      if (results[static_cast<size_t>(g)].trajectory.termination != "error" ||
          attempt >= options.retry_count) {
        break;
      }
    }
  };

  const int workers = std::max(1, std::min(options.worker_cap, n));
  if (workers == 1) {
    for (int g = 0; g < n; ++g) run_slot(g);
    return results;
  }

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int g = next.fetch_add(1);
        if (g >= n) return;
        try {
          run_slot(g);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace duet::rollout

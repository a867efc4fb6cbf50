#pragma once

#include "duet/rollout/episode.hpp"

namespace duet::rollout {

struct GroupOptions {
  int group_size = 8;
  uint64_t base_seed = 0;
  // Worker threads for the group (1 = sequential). Results are identical
  // regardless of this value: episode g always runs with seed
  // hash_mix(base_seed, g) and lands in slot g.
  int worker_cap = 1;
  // Same-seed reruns after an "error" termination — useful when a remote
  // endpoint is flaky. Fully deterministic policies fail identically on
  // every attempt, so leave this 0 for local runs.
  int retry_count = 0;
  EpisodeOptions episode;  // its `seed` is overridden per episode
};

// Samples group_size episodes of the same task with decorrelated seeds.
// Fresh policy instances are built per episode from the factories (so
// per-episode state such as script cursors never leaks across episodes).
std::vector<EpisodeResult> sample_group(const env::Environment& environment,
                                        const env::TaskSpec& task,
                                        const policy::PolicyFactory& make_agent,
                                        const policy::PolicyFactory& make_user,
                                        const GroupOptions& options);

}  // namespace duet::rollout

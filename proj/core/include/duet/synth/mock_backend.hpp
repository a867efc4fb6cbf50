#pragma once

#include <cstdint>
#include <mutex>
#include <string>

#include "duet/env/domain.hpp"
#include "duet/synth/backend.hpp"

namespace duet::synth {

// Quality schedules and fault-injection knobs for the scripted backend.
// Rates are functions of the prompt-set version v (1-based):
//   infeasible(v) = max(infeasible_base - infeasible_step * (v-1), infeasible_floor)
//   badcall(v)    = max(badcall_base   - badcall_step   * (v-1), badcall_floor)
// so prompt evolution measurably improves draft quality, which is what the
// pilot loop's stopping rule keys on.
struct MockTuning {
  double infeasible_base = 0.30;
  double infeasible_step = 0.10;
  double infeasible_floor = 0.04;
  double badcall_base = 0.25;
  double badcall_step = 0.08;
  double badcall_floor = 0.02;

  // Scale-phase drift: global instance indexes in [drift_start, drift_end)
  // produce agent drafts that call a tool the domain does not have — a
  // transient upstream regression. drift_start = -1 disables.
  int drift_start = -1;
  int drift_end = -1;
  // Sticky drift has no end and also poisons re-pilot batches, so no
  // amount of prompt evolution recovers (forces the unrecoverable path).
  bool drift_sticky = false;
};

// Deterministic stand-in for a chat model: replies are a pure function of
// (construction seed, request worker, request metadata), so whole synthesis
// runs are byte-reproducible and safe to drive from multiple threads.
// Scenario and task content is grounded in the actual domain fixture —
// entity ids, fares and policy gates are read from it, not invented.
class MockBackend : public ChatBackend {
 public:
  explicit MockBackend(env::Domain domain, uint64_t seed, MockTuning tuning = {});

  std::string complete(const BackendRequest& request) override;

  // Test hook: copy of the most recent request.
  BackendRequest last_request() const;

  double infeasible_rate(int version) const;
  double badcall_rate(int version) const;

 private:
  json plan_reply() const;
  json prompt_engineer_reply(const json& meta) const;
  json judge_reply(const json& meta) const;
  json scenario_reply(const json& meta) const;
  json task_reply(const json& meta) const;
  std::string user_turn_reply(const json& meta) const;
  std::string agent_turn_reply(const json& meta) const;
  json modify_reply(const json& meta) const;

  json build_task(int set, int instance, int version, bool force_valid) const;
  bool drift_active(const json& meta) const;

  env::Domain domain_;
  uint64_t seed_ = 0;
  MockTuning tuning_;

  mutable std::mutex mu_;
  BackendRequest last_;
};

}  // namespace duet::synth

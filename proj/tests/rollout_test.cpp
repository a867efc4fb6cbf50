#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <memory>

#include "duet/env/domain.hpp"
#include "duet/env/env.hpp"
#include "duet/env/task.hpp"
#include "duet/errors.hpp"
#include "duet/policy/scripted.hpp"
#include "duet/policy/toy.hpp"
#include "duet/rollout/episode.hpp"
#include "duet/rollout/group.hpp"
#include "duet/rollout/sft.hpp"

using namespace duet;
using namespace duet::rollout;

namespace {

struct Fixture {
  env::Domain domain = env::Domain::builtin_toy();
  env::Environment environment{domain};
  env::TaskSpec task = env::builtin_toy_cancel_task();
};

policy::ScriptedPolicy scripted_agent(std::vector<std::string> lines) {
  return policy::ScriptedPolicy(env::Role::agent, std::move(lines));
}

const std::vector<std::string> kGoodAgentLines = {
    R"(<function>{"name": "cancel_reservation", "arguments": {"reservation_id": "RES301"}}</function>)",
    "<message>Done - RES301 is cancelled.</message>",
};

policy::PolicyFactory factory_for(env::Role role, std::vector<std::string> lines) {
  return [role, lines] {
    return std::make_unique<policy::ScriptedPolicy>(role, lines);
  };
}

policy::PolicyFactory greeting_user_factory() {
  return [] {
    return std::make_unique<policy::ScriptedPolicy>(policy::ScriptedPolicy::greeting_user());
  };
}

// Fails with RemoteUnavailable for the first `failures` instances built,
// then behaves like a fixed message. Exercises the same-seed retry path.
class FlakyAgent : public policy::Policy {
 public:
  FlakyAgent(std::shared_ptr<std::atomic<int>> instances, int failures)
      : broken_(instances->fetch_add(1) < failures) {}
  env::Role role() const override { return env::Role::agent; }
  policy::PolicyOutput act(const env::Observation&, Rng&) override {
    if (broken_) throw RemoteUnavailable("synthetic outage");
    policy::PolicyOutput out;
    out.raw = "<message>ok</message>";
    out.parsed = policy::parse_agent_output(out.raw);
    return out;
  }

 private:
  bool broken_;
};

}  // namespace

TEST_CASE("scripted episode runs to a user stop") {
  Fixture fx;
  auto agent = scripted_agent(kGoodAgentLines);
  auto user = policy::ScriptedPolicy::greeting_user();
  EpisodeOptions options;
  options.seed = 11;
  options.scorer = [](const Trajectory& t) {
    return t.termination == "stop" ? 1.0 : 0.0;
  };
  auto result = run_episode(fx.environment, fx.task, agent, user, options);
  const Trajectory& t = result.trajectory;

  CHECK(t.task_id == "toy-cancel-001");
  CHECK(t.termination == "stop");
  CHECK(t.reward == 1.0);
  REQUIRE(t.turns.size() == 4);
  CHECK(t.turns[0].actor == env::Role::user);
  CHECK(t.turns[1].actor == env::Role::agent);
  CHECK(t.turns[2].actor == env::Role::agent);
  CHECK(t.turns[3].actor == env::Role::user);
  for (size_t i = 0; i < t.turns.size(); ++i) CHECK(t.turns[i].index == static_cast<int>(i));

  REQUIRE(t.turns[1].tool_result.has_value());
  CHECK(t.turns[1].tool_result->ok());
  CHECK_FALSE(t.turns[0].tool_result.has_value());
  CHECK(t.agent_token_total() == 0);  // scripted turns carry no tokens

  CHECK(result.final_state.terminated());
  CHECK(result.final_state.entities["reservations"]["RES301"]["status"] == "cancelled");
}

TEST_CASE("malformed output is demoted to a plain message") {
  Fixture fx;
  auto agent = scripted_agent({"um, let me think about that",
                               "<message>Sorry about that. Cancelled!</message>"});
  auto user = policy::ScriptedPolicy::greeting_user();
  auto result = run_episode(fx.environment, fx.task, agent, user, {});
  const Trajectory& t = result.trajectory;

  CHECK(t.termination == "stop");
  REQUIRE(t.turns.size() >= 2);
  CHECK_FALSE(t.turns[1].parsed.ok);
  CHECK(t.turns[1].raw == "um, let me think about that");
  // The environment saw it as a message: floor flipped to the user, whose
  // next line stopped the episode.
  CHECK(t.turns[2].actor == env::Role::user);
  const json& history = result.final_state.history();
  CHECK(history[1]["kind"] == "message");
  CHECK(history[1]["text"] == "um, let me think about that");
}

TEST_CASE("script exhaustion ends the episode as an error") {
  Fixture fx;
  auto agent = scripted_agent({"<message>Hello! How can I help?</message>",
                               "<message>Anything else?</message>"});
  // One line, no stop marker: the driver will come back for a third user
  // turn that does not exist.
  policy::ScriptedPolicy user(env::Role::user,
                              {"<answer>Hi, please cancel RES301.</answer>",
                               "<answer>Actually, hold on.</answer>"});
  EpisodeOptions options;
  options.scorer = [](const Trajectory&) { return 1.0; };
  auto result = run_episode(fx.environment, fx.task, agent, user, options);
  CHECK(result.trajectory.termination == "error");
  CHECK(result.trajectory.reward == 0.0);  // scorer never consulted
}

TEST_CASE("record cap terminates as max_turns") {
  Fixture fx;
  // A table saturated toward one read-only tool loops forever on its own.
  auto params = std::make_shared<policy::ToyParams>(policy::kToyFeatureCount, 7);
  policy::ToyVocab vocab = policy::ToyVocab::for_domain(fx.domain);
  const auto reader = static_cast<size_t>(vocab.id("get_reservation_details"));
  for (size_t f = 0; f < params->n_features(); ++f) params->at(f, reader) = 40.0;
  auto agent = policy::ToyPolicy::for_task(params, fx.domain, fx.task);
  auto user = policy::ScriptedPolicy::greeting_user();

  EpisodeOptions options;
  options.max_records = 6;
  auto result = run_episode(fx.environment, fx.task, *agent, user, options);
  CHECK(result.trajectory.termination == "max_turns");
  CHECK(result.trajectory.turns.size() == 6);
  for (size_t i = 1; i < 6; ++i) {
    CHECK(result.trajectory.turns[i].actor == env::Role::agent);
    REQUIRE(result.trajectory.turns[i].tool_result.has_value());
    CHECK(result.trajectory.turns[i].tool_result->ok());
  }
  CHECK(result.trajectory.agent_token_total() > 0);
}

TEST_CASE("dual control: the user can call permitted tools mid-episode") {
  env::Domain domain = env::Domain::builtin_airline();
  env::Environment environment{domain};
  env::TaskSpec task;
  task.id = "airline-adhoc";
  task.domain = "airline";
  task.purpose = "check a flight";

  policy::ScriptedPolicy user(
      env::Role::user,
      {R"(<function>{"name": "get_flight_status", "arguments": {"flight_id": "HAT005", "date": "2024-05-17"}}</function>)",
       "<answer>My flight is cancelled, nothing to do. ###STOP###</answer>"});
  auto agent = scripted_agent({"<message>Hello!</message>"});

  auto result = run_episode(environment, task, agent, user, {});
  const Trajectory& t = result.trajectory;
  CHECK(t.termination == "stop");
  REQUIRE(t.turns.size() == 2);  // tool call kept the floor; agent never spoke
  CHECK(t.turns[0].actor == env::Role::user);
  REQUIRE(t.turns[0].tool_result.has_value());
  CHECK(t.turns[0].tool_result->payload["status"] == "cancelled");
}

TEST_CASE("replay re-executes calls and exposes forgeries") {
  Fixture fx;
  auto agent = scripted_agent(kGoodAgentLines);
  auto user = policy::ScriptedPolicy::greeting_user();
  auto live = run_episode(fx.environment, fx.task, agent, user, {});

  SUBCASE("faithful replay matches the live run byte for byte") {
    Replay replay = replay_trajectory(fx.environment, fx.task, live.trajectory);
    CHECK(replay.final_state.serialize() == live.final_state.serialize());
    REQUIRE(replay.tool_steps.size() == 1);
    CHECK(replay.tool_steps[0].turn_index == 1);
    CHECK(replay.tool_steps[0].executed.ok());
    CHECK(replay.tool_steps[0].call.name == "cancel_reservation");
    // The pre-call snapshot is the untouched initial database.
    CHECK(replay.tool_steps[0].pre_call_entities["reservations"]["RES301"]["status"] ==
          "active");
  }

  SUBCASE("forged tool status cannot survive replay") {
    Trajectory forged = live.trajectory;
    // Claim the cancellation failed (or never happened): replay ignores
    // the recorded result and reports what the tool really returned.
    forged.turns[1].tool_result->status = "error";
    Replay replay = replay_trajectory(fx.environment, fx.task, forged);
    CHECK(replay.tool_steps[0].executed.status == "ok");
    CHECK(replay.final_state.entities["reservations"]["RES301"]["status"] == "cancelled");
  }

  SUBCASE("turns appended after termination refuse to replay") {
    Trajectory forged = live.trajectory;
    TurnRecord extra;
    extra.index = 4;
    extra.actor = env::Role::agent;
    extra.raw = "<message>and one more thing</message>";
    extra.parsed = policy::parse_agent_output(extra.raw);
    forged.turns.push_back(extra);
    CHECK_THROWS_AS(replay_trajectory(fx.environment, fx.task, forged),
                    ProtocolViolation);
  }

  SUBCASE("out-of-turn speaker refuses to replay") {
    Trajectory forged = live.trajectory;
    forged.turns[0].actor = env::Role::agent;  // the user opens, always
    CHECK_THROWS_AS(replay_trajectory(fx.environment, fx.task, forged),
                    ProtocolViolation);
  }
}

TEST_CASE("trajectory serialization round trips") {
  Fixture fx;
  auto params = std::make_shared<policy::ToyParams>(policy::kToyFeatureCount, 7);
  auto agent = policy::ToyPolicy::for_task(params, fx.domain, fx.task);
  auto user = policy::ScriptedPolicy::greeting_user();
  EpisodeOptions options;
  options.seed = 3;
  options.max_records = 10;
  auto result = run_episode(fx.environment, fx.task, *agent, user, options);

  json j = result.trajectory.to_json();
  Trajectory back = Trajectory::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.seed == 3);
  CHECK(back.turns.size() == result.trajectory.turns.size());

  const auto path = std::filesystem::temp_directory_path() / "duet_rollout_roundtrip.jsonl";
  save_trajectories(path.string(), {result.trajectory, result.trajectory});
  auto loaded = load_trajectories(path.string());
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].to_json() == j);
  CHECK(loaded[1].to_json() == j);
  std::filesystem::remove(path);
}

TEST_CASE("group sampling is order-independent and seed-decorrelated") {
  Fixture fx;
  auto params = std::make_shared<policy::ToyParams>(policy::kToyFeatureCount, 7);
  policy::PolicyFactory make_agent = [&] {
    return policy::ToyPolicy::for_task(params, fx.domain, fx.task);
  };
  policy::PolicyFactory make_user = greeting_user_factory();

  GroupOptions options;
  options.group_size = 6;
  options.base_seed = 99;
  options.episode.max_records = 12;

  options.worker_cap = 1;
  auto sequential = sample_group(fx.environment, fx.task, make_agent, make_user, options);
  options.worker_cap = 4;
  auto threaded = sample_group(fx.environment, fx.task, make_agent, make_user, options);

  REQUIRE(sequential.size() == 6);
  REQUIRE(threaded.size() == 6);
  for (size_t g = 0; g < 6; ++g) {
    CHECK(canonical(sequential[g].trajectory.to_json()) ==
          canonical(threaded[g].trajectory.to_json()));
  }

  // Episodes within the group are decorrelated...
  bool within_differs = false;
  for (size_t g = 1; g < 6 && !within_differs; ++g) {
    within_differs = sequential[0].trajectory.to_json() != sequential[g].trajectory.to_json();
  }
  CHECK(within_differs);

  // ...and a different base seed moves the whole group.
  options.base_seed = 100;
  options.worker_cap = 1;
  auto other = sample_group(fx.environment, fx.task, make_agent, make_user, options);
  bool across_differs = false;
  for (size_t g = 0; g < 6 && !across_differs; ++g) {
    across_differs = other[g].trajectory.to_json() != sequential[g].trajectory.to_json();
  }
  CHECK(across_differs);
}

TEST_CASE("error retries rebuild policies with the same seed") {
  Fixture fx;
  auto instances = std::make_shared<std::atomic<int>>(0);
  policy::PolicyFactory make_agent = [instances] {
    return std::make_unique<FlakyAgent>(instances, 1);
  };
  policy::PolicyFactory make_user = greeting_user_factory();

  GroupOptions options;
  options.group_size = 1;
  options.base_seed = 5;
  options.retry_count = 2;
  auto group = sample_group(fx.environment, fx.task, make_agent, make_user, options);
  CHECK(group[0].trajectory.termination == "stop");
  CHECK(instances->load() == 2);  // first instance failed, retry succeeded
}

TEST_CASE("sft export pairs rebuilt contexts with recorded completions") {
  Fixture fx;
  auto agent = scripted_agent(kGoodAgentLines);
  auto user = policy::ScriptedPolicy::greeting_user();
  EpisodeOptions options;
  options.scorer = [](const Trajectory& t) { return t.termination == "stop" ? 1.0 : 0.0; };
  auto good = run_episode(fx.environment, fx.task, agent, user, options);

  // A malformed turn flips the floor like any message, so the user needs
  // an extra line before stopping for the agent to get a second chance.
  auto agent2 = scripted_agent({"not even trying",
                                "<message>Cancelled.</message>"});
  policy::ScriptedPolicy user2(env::Role::user,
                               {"<answer>Please cancel RES301.</answer>",
                                "<answer>Sorry, what?</answer>",
                                "<answer>Thanks. ###STOP###</answer>"});
  auto sloppy = run_episode(fx.environment, fx.task, agent2, user2, options);
  sloppy.trajectory.reward = 1.0;  // force it past the filter to test turn skipping

  SUBCASE("rows cover exactly the agent turns of accepted episodes") {
    auto rows = export_sft(fx.environment, fx.task, {good.trajectory}, {});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0]["turn_index"] == 1);
    CHECK(rows[1]["turn_index"] == 2);
    CHECK(rows[0]["completion"] == kGoodAgentLines[0]);
    CHECK(rows[1]["completion"] == kGoodAgentLines[1]);
    // The second row's context includes the tool exchange of the first.
    const json& messages = rows[1]["messages"];
    CHECK(messages[0]["role"] == "system");
    bool saw_tool = false;
    for (const json& m : messages) saw_tool = saw_tool || m["role"] == "tool";
    CHECK(saw_tool);
  }

  SUBCASE("reward filter and malformed-turn filter") {
    Trajectory losing = good.trajectory;
    losing.reward = 0.0;
    CHECK(export_sft(fx.environment, fx.task, {losing}, {}).empty());

    auto rows = export_sft(fx.environment, fx.task, {sloppy.trajectory}, {});
    REQUIRE(rows.size() == 1);  // the garbled turn is dropped
    CHECK(rows[0]["completion"] == "<message>Cancelled.</message>");

    SftOptions keep_all;
    keep_all.skip_malformed_turns = false;
    CHECK(export_sft(fx.environment, fx.task, {sloppy.trajectory}, keep_all).size() == 2);
  }

  SUBCASE("task mismatch is rejected") {
    Trajectory alien = good.trajectory;
    alien.task_id = "other-task";
    CHECK_THROWS_AS(export_sft(fx.environment, fx.task, {alien}, {}), BadConfig);
  }
}

TEST_CASE("seeded episodes are bit-reproducible across many seeds") {
  Fixture fx;
  auto params = std::make_shared<policy::ToyParams>(policy::kToyFeatureCount, 7);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    auto a1 = policy::ToyPolicy::for_task(params, fx.domain, fx.task);
    auto u1 = policy::ScriptedPolicy::greeting_user();
    auto a2 = policy::ToyPolicy::for_task(params, fx.domain, fx.task);
    auto u2 = policy::ScriptedPolicy::greeting_user();
    EpisodeOptions options;
    options.seed = seed;
    options.max_records = 16;
    auto r1 = run_episode(fx.environment, fx.task, *a1, u1, options);
    auto r2 = run_episode(fx.environment, fx.task, *a2, u2, options);
    REQUIRE(canonical(r1.trajectory.to_json()) == canonical(r2.trajectory.to_json()));
    REQUIRE(r1.final_state.serialize() == r2.final_state.serialize());
  }
}

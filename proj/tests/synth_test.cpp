#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "duet/env/domain.hpp"
#include "duet/env/env.hpp"
#include "duet/env/task.hpp"
#include "duet/errors.hpp"
#include "duet/rollout/episode.hpp"
#include "duet/synth/engine.hpp"
#include "duet/synth/mock_backend.hpp"
#include "duet/synth/prompts.hpp"
#include "duet/synth/stages.hpp"
#include "duet/verify/verify.hpp"

using namespace duet;
using namespace duet::synth;

namespace {

env::Environment airline_env() { return env::Environment(env::Domain::builtin_airline()); }

MockBackend standard_backend(MockTuning tuning = {}) {
  return MockBackend(env::Domain::builtin_airline(), 99, tuning);
}

PromptSet first_set(ChatBackend& backend) {
  return generate_prompt_set(WorkflowPlan::canonical(), {}, 0, backend);
}

// Minimal scripted backend for exercising engine error paths: every worker
// gets a fixed reply.
class CannedBackend : public ChatBackend {
 public:
  std::map<Worker, std::string> replies;
  std::string complete(const BackendRequest& request) override {
    auto it = replies.find(request.worker);
    if (it == replies.end()) throw BackendError("canned backend has no reply");
    return it->second;
  }
};

json valid_cancel_task(const std::string& id, const std::string& user,
                       const std::string& res) {
  json args;
  args["get_user_details"] = json{{"user_id", user}};
  args["get_reservation_details"] = json{{"reservation_id", res}};
  args["cancel_reservation"] = json{{"reservation_id", res}};
  return json{{"id", id},
              {"domain", "airline"},
              {"purpose", "cancel a reservation"},
              {"reason_for_call", "I need to cancel " + res + "."},
              {"known_info", "user " + user},
              {"must_have_functions", json::array({"cancel_reservation"})},
              {"selected_parameters",
               json{{"archetype", "cancel"},
                    {"user_id", user},
                    {"reservation_id", res},
                    {"policy_focuses", json::array({"cancellation_window"})},
                    {"tool_arguments", args}}}};
}

}  // namespace

TEST_CASE("workflow planning validates the stage chain") {
  auto environment = airline_env();
  auto backend = standard_backend();

  SUBCASE("the planner's canonical chain passes validation") {
    WorkflowPlan plan = plan_workflow("airline tasks", environment.domain(),
                                      json::object(), backend);
    REQUIRE(plan.stages.size() == 7);
    CHECK(plan.stages.front() == Stage::random_pool);
    CHECK(plan.stages.back() == Stage::validation_function);
    CHECK(plan.max_repair == 3);
    CHECK(plan.max_prompt_iterations == 16);
  }

  SUBCASE("a chain that does not end at checker construction is rejected") {
    CannedBackend canned;
    canned.replies[Worker::planner] = canonical(
        json{{"stages", json::array({"random_pool", "user_intent", "task_validation",
                                     "dialog_synthesis", "trajectory_validation",
                                     "validation_function", "modify"})},
             {"max_repair", 3},
             {"max_prompt_iterations", 16}});
    CHECK_THROWS_AS(
        plan_workflow("x", environment.domain(), json::object(), canned), BadPlan);
  }

  SUBCASE("an unknown stage name is rejected") {
    CannedBackend canned;
    canned.replies[Worker::planner] = canonical(
        json{{"stages", json::array({"random_pool", "user_intent", "task_validation",
                                     "dialog_synthesis", "trajectory_validation",
                                     "improvise", "validation_function"})},
             {"max_repair", 3},
             {"max_prompt_iterations", 16}});
    CHECK_THROWS_AS(
        plan_workflow("x", environment.domain(), json::object(), canned), BadPlan);
  }

  SUBCASE("a missing stage is rejected") {
    CannedBackend canned;
    canned.replies[Worker::planner] = canonical(
        json{{"stages", json::array({"random_pool", "user_intent", "task_validation",
                                     "dialog_synthesis", "trajectory_validation",
                                     "validation_function"})},
             {"max_repair", 3},
             {"max_prompt_iterations", 16}});
    CHECK_THROWS_AS(
        plan_workflow("x", environment.domain(), json::object(), canned), BadPlan);
  }

  SUBCASE("reordering interior stages is allowed when the terminal is right") {
    WorkflowPlan plan = WorkflowPlan::canonical();
    std::swap(plan.stages[0], plan.stages[1]);
    CHECK_NOTHROW(plan.validate());
  }

  SUBCASE("targets override the loop bounds") {
    WorkflowPlan plan = plan_workflow("x", environment.domain(),
                                      json{{"max_repair", 2}}, backend);
    CHECK(plan.max_repair == 2);
  }
}

TEST_CASE("prompt set generation and evolution") {
  auto backend = standard_backend();
  WorkflowPlan plan = WorkflowPlan::canonical();

  SUBCASE("set 0 binds the stock worker prompts verbatim") {
    PromptSet set = first_set(backend);
    CHECK(set.set_id == 0);
    CHECK(set.version == 1);
    CHECK(set.lineage.empty());
    for (const auto& [worker, text] : default_prompt_map()) {
      REQUIRE(set.prompts.count(worker) == 1);
      CHECK(set.prompts.at(worker) == text);
    }
  }

  SUBCASE("later sets are conditioned on every earlier summary") {
    PromptSet s0 = first_set(backend);
    std::vector<std::string> summaries{summarize_prompt_set(s0), "set 1 v1: x",
                                       "set 2 v1: y"};
    PromptSet s3 = generate_prompt_set(plan, summaries, 3, backend);
    BackendRequest req = backend.last_request();
    CHECK(req.worker == Worker::prompt_engineer);
    CHECK(req.metadata.at("mode") == "init");
    CHECK(req.metadata.at("summaries").size() == 3);
    CHECK(s3.prompt_for(Worker::user_intent) != s0.prompt_for(Worker::user_intent));
    CHECK(s3.prompt_for(Worker::user_intent).find("emphasis") != std::string::npos);
    CHECK_NOTHROW(s3.validate());
  }

  SUBCASE("evolution appends a lineage step per version") {
    PromptSet set = first_set(backend);
    Critique crit;
    crit.id = "crit-x";
    crit.target = "x";
    crit.findings.push_back({"schema_violation", "missing arguments", "turn 2"});
    for (int v = 1; v <= 16; ++v) {
      set = evolve(set, {crit}, backend);
      CHECK(set.version == v + 1);
      CHECK(set.lineage.size() == static_cast<size_t>(v));
      CHECK(set.lineage.back().from_version == v);
      CHECK(set.lineage.back().critique_ids == std::vector<std::string>{"crit-x"});
    }
    CHECK_NOTHROW(set.validate());
  }

  SUBCASE("evolution without critiques is refused") {
    PromptSet set = first_set(backend);
    CHECK_THROWS_AS(evolve(set, {}, backend), BadConfig);
  }

  SUBCASE("a bundle missing a worker prompt fails validation") {
    CannedBackend canned;
    json prompts = json::object();
    for (const auto& [worker, text] : default_prompt_map()) prompts[worker] = text;
    prompts.erase("trajectory");
    canned.replies[Worker::prompt_engineer] = canonical(json{{"prompts", prompts}});
    CHECK_THROWS_AS(generate_prompt_set(plan, {}, 0, canned), BadPlan);
  }
}

TEST_CASE("feasibility probing grounds verdicts in executions") {
  auto environment = airline_env();

  SUBCASE("a well-grounded task probes feasible") {
    auto task = env::TaskSpec::from_json(
        valid_cancel_task("t1", "usr_ben_002", "RES003"));
    TaskVerdict v = probe_task_feasibility(environment, task);
    CHECK(v.feasible);
    CHECK(v.issues.empty());
    // user lookup, reservation lookup, then the mutator actually executed
    REQUIRE(v.probes.size() == 3);
    CHECK(v.probes[2]["tool"] == "cancel_reservation");
    CHECK(v.probes[2]["status"] == "ok");
  }

  SUBCASE("a nonexistent reservation is a missing resource") {
    auto task = env::TaskSpec::from_json(
        valid_cancel_task("t2", "usr_ben_002", "RES999"));
    TaskVerdict v = probe_task_feasibility(environment, task);
    REQUIRE_FALSE(v.feasible);
    CHECK(v.issues[0].category == "missing_resource");
    CHECK(v.issues[0].evidence.find("RES999") != std::string::npos);
  }

  SUBCASE("a policy-gated operation is a policy violation with the rule cited") {
    // RES009 has an already-flown segment; cancellation is forbidden.
    auto task = env::TaskSpec::from_json(
        valid_cancel_task("t3", "usr_femi_006", "RES009"));
    TaskVerdict v = probe_task_feasibility(environment, task);
    REQUIRE_FALSE(v.feasible);
    REQUIRE(v.issues.size() == 1);
    CHECK(v.issues[0].category == "policy_violation");
    CHECK(v.issues[0].evidence.find("flown") != std::string::npos);
  }

  SUBCASE("acting on someone else's reservation contradicts the task") {
    auto task = env::TaskSpec::from_json(
        valid_cancel_task("t4", "usr_ava_001", "RES005"));
    TaskVerdict v = probe_task_feasibility(environment, task);
    REQUIRE_FALSE(v.feasible);
    CHECK(v.issues[0].category == "contradictory_constraints");
    CHECK(v.issues[0].evidence.find("usr_cora_003") != std::string::npos);
  }

  SUBCASE("arguments targeting a different user contradict the task") {
    json t = valid_cancel_task("t5", "usr_ava_001", "RES001");
    t["selected_parameters"]["tool_arguments"] = json{
        {"get_user_details", json{{"user_id", "usr_ava_001"}}},
        {"send_compensation", json{{"user_id", "usr_hana_008"}, {"amount", 50}}}};
    t["must_have_functions"] = json::array({"send_compensation"});
    t["selected_parameters"].erase("reservation_id");
    auto task = env::TaskSpec::from_json(t);
    TaskVerdict v = probe_task_feasibility(environment, task);
    REQUIRE_FALSE(v.feasible);
    CHECK(v.issues[0].category == "contradictory_constraints");
  }

  SUBCASE("a must-have function without canonical arguments cannot be probed") {
    json t = valid_cancel_task("t6", "usr_ben_002", "RES003");
    t["selected_parameters"]["tool_arguments"].erase("cancel_reservation");
    auto task = env::TaskSpec::from_json(t);
    TaskVerdict v = probe_task_feasibility(environment, task);
    REQUIRE_FALSE(v.feasible);
    CHECK(v.issues[0].category == "missing_resource");
  }

  SUBCASE("probing never mutates the caller's state source") {
    // Feasibility probes execute cancel_reservation for real; a fresh reset
    // afterwards must still see the reservation active.
    auto task = env::TaskSpec::from_json(
        valid_cancel_task("t7", "usr_ben_002", "RES003"));
    probe_task_feasibility(environment, task);
    env::EnvState state = environment.reset(task);
    CHECK(state.entities["reservations"]["RES003"]["status"] == "active");
  }
}

TEST_CASE("trajectory validation classifies defects and repair drops them") {
  auto environment = airline_env();
  auto backend = standard_backend();
  PromptSet set = first_set(backend);

  // Instance 12 of set 0 at version 1 drafts a book dialogue with one
  // schema-violating call injected (pinned by the backend seed).
  json meta{{"set", 0}, {"version", 1}, {"instance", 12}, {"phase", "pilot"},
            {"repilot", false}};
  BackendRequest intent{Worker::user_intent, json::array(), meta};
  json task_json = json::parse(backend.complete(intent));
  auto task = env::TaskSpec::from_json(task_json);

  json dialog_meta = meta;
  dialog_meta["task"] = task_json;
  BackendPolicy agent(env::Role::agent, Worker::trajectory, backend,
                      set.prompt_for(Worker::trajectory), dialog_meta);
  BackendPolicy user(env::Role::user, Worker::user_simulator, backend,
                     set.prompt_for(Worker::user_simulator), dialog_meta);
  rollout::EpisodeOptions options;
  options.seed = 2024;
  options.max_records = 24;
  auto episode = rollout::run_episode(environment, task, agent, user, options);
  REQUIRE(episode.trajectory.termination == "stop");

  TrajectoryVerdict verdict = validate_trajectory(environment, task, episode.trajectory);
  REQUIRE_FALSE(verdict.pass);
  REQUIRE(verdict.issues.size() == 1);
  CHECK(verdict.issues[0].category == "schema_violation");
  CHECK(verdict.issues[0].turn >= 0);
  CHECK(verdict.tool_calls_total == 4);
  CHECK(verdict.tool_calls_valid == 3);

  SUBCASE("dropping the flagged turn makes the dialogue validate") {
    auto repaired = apply_trajectory_repair(episode.trajectory, {verdict.issues[0].turn});
    CHECK(repaired.turns.size() == episode.trajectory.turns.size() - 1);
    for (size_t i = 0; i < repaired.turns.size(); ++i) {
      CHECK(repaired.turns[i].index == static_cast<int>(i));
    }
    TrajectoryVerdict after = validate_trajectory(environment, task, repaired);
    CHECK(after.pass);
    CHECK(after.tool_calls_total == 3);
    CHECK(after.tool_calls_valid == 3);
  }

  SUBCASE("dropping a turn outside the record is refused") {
    CHECK_THROWS_AS(apply_trajectory_repair(episode.trajectory, {99}), BadSpec);
  }

  SUBCASE("a missing must-have execution is goal_incomplete") {
    rollout::Trajectory gutted = episode.trajectory;
    // Remove every successful book_reservation call.
    for (int i = static_cast<int>(gutted.turns.size()) - 1; i >= 0; --i) {
      const auto* call =
          std::get_if<env::ToolCall>(&gutted.turns[i].parsed.payload);
      if (call && call->name == "book_reservation") {
        gutted.turns.erase(gutted.turns.begin() + i);
      }
    }
    for (size_t i = 0; i < gutted.turns.size(); ++i) {
      gutted.turns[i].index = static_cast<int>(i);
    }
    TrajectoryVerdict v = validate_trajectory(environment, task, gutted);
    REQUIRE_FALSE(v.pass);
    bool found = false;
    for (const auto& issue : v.issues) found |= issue.category == "goal_incomplete";
    CHECK(found);
  }
}

TEST_CASE("must-have preservation ratio") {
  json orig{{"must_have_functions", json::array({"a", "b", "c", "d"})}};
  json half{{"must_have_functions", json::array({"a", "b", "x"})}};
  json all{{"must_have_functions", json::array({"d", "c", "b", "a"})}};
  CHECK(must_have_preservation(orig, half) == doctest::Approx(0.5));
  CHECK(must_have_preservation(orig, all) == doctest::Approx(1.0));
  CHECK(must_have_preservation(json::object(), half) == doctest::Approx(1.0));
}

TEST_CASE("instance pipeline: acceptance, repair budget and self-verification") {
  auto environment = airline_env();
  auto backend = standard_backend();
  WorkflowPlan plan = WorkflowPlan::canonical();
  PromptSet set = first_set(backend);

  auto run_at = [&](int index) {
    InstanceContext ctx;
    ctx.index = index;
    ctx.seed = hash_mix(5ull, "probe", static_cast<uint64_t>(index));
    return run_instance(environment, plan, set, backend, ctx);
  };

  SUBCASE("a clean draft is accepted without repairs") {
    SynthesisInstance inst = run_at(2);
    REQUIRE(inst.accepted());
    CHECK(inst.repair_count == 0);
    CHECK_FALSE(inst.infeasible_initially);
    CHECK(inst.error_categories.empty());
    CHECK(inst.trajectory.reward == 1.0);
    CHECK(inst.task.contains("checker_spec"));
  }

  SUBCASE("an infeasible draft is repaired at the task level and accepted") {
    SynthesisInstance inst = run_at(13);
    REQUIRE(inst.accepted());
    CHECK(inst.infeasible_initially);
    CHECK(inst.repair_count == 1);
    REQUIRE(inst.error_categories.size() == 1);
    CHECK(inst.error_categories[0] == "missing_resource");
  }

  SUBCASE("a bad call is repaired at the trajectory level and accepted") {
    SynthesisInstance inst = run_at(12);
    REQUIRE(inst.accepted());
    CHECK_FALSE(inst.infeasible_initially);
    CHECK(inst.repair_count == 1);
    CHECK(inst.error_categories == std::vector<std::string>{"schema_violation"});
    // Draft-quality counters describe the dialogue before repair.
    CHECK(inst.tool_calls_total == 4);
    CHECK(inst.tool_calls_valid == 3);
  }

  SUBCASE("both defects stack within the shared budget") {
    SynthesisInstance inst = run_at(0);
    REQUIRE(inst.accepted());
    CHECK(inst.infeasible_initially);
    CHECK(inst.repair_count == 2);
  }

  SUBCASE("every accepted instance rewards 1.0 against its own checker") {
    for (int i = 0; i < 8; ++i) {
      SynthesisInstance inst = run_at(i);
      REQUIRE(inst.accepted());
      auto task = env::TaskSpec::from_json(inst.task);
      auto report = verify::evaluate_submission(environment, task, inst.trajectory);
      CHECK(report.reward == 1.0);
      CHECK(report.overall_pass);
    }
  }

  SUBCASE("the checker is discriminative, not a rubber stamp") {
    SynthesisInstance inst = run_at(2);  // compensation archetype
    REQUIRE(inst.accepted());
    auto task = env::TaskSpec::from_json(inst.task);
    rollout::Trajectory gutted = inst.trajectory;
    for (int i = static_cast<int>(gutted.turns.size()) - 1; i >= 0; --i) {
      const auto* call =
          std::get_if<env::ToolCall>(&gutted.turns[i].parsed.payload);
      if (call && call->name == "send_compensation") {
        gutted.turns.erase(gutted.turns.begin() + i);
      }
    }
    for (size_t i = 0; i < gutted.turns.size(); ++i) {
      gutted.turns[i].index = static_cast<int>(i);
    }
    auto report = verify::evaluate_submission(environment, task, gutted);
    CHECK(report.reward == 0.0);
  }

  SUBCASE("a draft that never becomes feasible exhausts the budget and is discarded") {
    CannedBackend canned;
    json bad_task = valid_cancel_task("hopeless", "usr_ben_002", "RES999");
    canned.replies[Worker::random_pool] = canonical(json{{"archetype", "cancel"}});
    canned.replies[Worker::user_intent] = canonical(bad_task);
    canned.replies[Worker::modify] =
        canonical(json{{"repair_mode", "TASK"}, {"task", bad_task}});
    InstanceContext ctx;
    ctx.index = 0;
    ctx.seed = 1;
    SynthesisInstance inst = run_instance(environment, plan, set, canned, ctx);
    CHECK_FALSE(inst.accepted());
    CHECK(inst.discard_reason == "infeasible");
    CHECK(inst.repair_count == plan.max_repair);
    CHECK(inst.infeasible_initially);
  }

  SUBCASE("a repair that rewrites the goal functions is rejected") {
    CannedBackend canned;
    json bad_task = valid_cancel_task("hopeless", "usr_ben_002", "RES999");
    json swapped = valid_cancel_task("swapped", "usr_ben_002", "RES003");
    swapped["must_have_functions"] = json::array({"update_reservation_baggage"});
    canned.replies[Worker::random_pool] = canonical(json{{"archetype", "cancel"}});
    canned.replies[Worker::user_intent] = canonical(bad_task);
    canned.replies[Worker::modify] =
        canonical(json{{"repair_mode", "TASK"}, {"task", swapped}});
    InstanceContext ctx;
    ctx.index = 0;
    ctx.seed = 1;
    SynthesisInstance inst = run_instance(environment, plan, set, canned, ctx);
    CHECK_FALSE(inst.accepted());
    CHECK(inst.discard_reason == "must_have_preservation");
  }

  SUBCASE("instances serialize and round-trip") {
    SynthesisInstance inst = run_at(7);
    json j = inst.to_json();
    SynthesisInstance back = SynthesisInstance::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.artifact_id() == inst.artifact_id());
  }
}

TEST_CASE("pilot loop: stop rule, evolution and failure modes") {
  auto environment = airline_env();

  SUBCASE("a pinned pilot converges and records the quality ramp") {
    auto backend = standard_backend();
    PromptSet set = first_set(backend);
    PilotResult pr = run_pilot(environment, WorkflowPlan::canonical(), set, 8, {},
                               backend, 7);
    REQUIRE(pr.converged);
    CHECK(pr.history.size() == 6);
    CHECK(pr.set.version == 6);
    CHECK(pr.history.size() >= 3);  // the stop rule needs a trend
    const PilotMetrics& first = pr.history.front();
    const PilotMetrics& last = pr.history.back();
    CHECK(first.infeasibility_rate > 0.10);
    CHECK(first.tool_call_validity < 0.95);
    CHECK(last.infeasibility_rate <= 0.10);
    CHECK(last.tool_call_validity >= 0.95);
    CHECK(last.judge_mean > first.judge_mean);
    std::set<std::string> known(pr.known_categories.begin(), pr.known_categories.end());
    CHECK(known.count("schema_violation"));
    CHECK(known.count("policy_violation"));
  }

  SUBCASE("batch size bounds are enforced") {
    auto backend = standard_backend();
    PromptSet set = first_set(backend);
    CHECK_THROWS_AS(run_pilot(environment, WorkflowPlan::canonical(), set, 4, {},
                              backend, 7),
                    BadConfig);
    CHECK_THROWS_AS(run_pilot(environment, WorkflowPlan::canonical(), set, 21, {},
                              backend, 7),
                    BadConfig);
  }

  SUBCASE("criteria that can never be met exhaust the iteration cap") {
    MockTuning stuck;
    stuck.infeasible_floor = 0.5;  // schedule can never drop below 50%
    auto backend = standard_backend(stuck);
    PromptSet set = first_set(backend);
    PilotResult pr = run_pilot(environment, WorkflowPlan::canonical(), set, 8, {},
                               backend, 7);
    CHECK_FALSE(pr.converged);
    CHECK(pr.history.size() == 16);
    CHECK(pr.set.version == 16);  // evolved every iteration but the last
  }
}

TEST_CASE("scale phase: volume, auditing and drift handling") {
  auto environment = airline_env();

  SUBCASE("scaling reaches the target and audits at the configured stride") {
    auto backend = standard_backend();
    ThreePhaseOptions opt;
    opt.prompt_sets = 2;
    opt.n_target = 24;
    opt.batch_size = 8;
    opt.audit_rate = 0.25;
    opt.seed = 11;
    ThreePhaseResult r = run_three_phase(environment, opt, backend);
    CHECK(r.pilots.size() == 2);
    for (const auto& p : r.pilots) CHECK(p.converged);
    CHECK(r.scale.accepted == 24);
    CHECK(r.scale.instances.size() == 24);
    CHECK(r.scale.drift_pauses == 0);
    int audits = 0;
    for (const auto& e : r.scale.audit_log) audits += e["event"] == "audit" ? 1 : 0;
    CHECK(audits == 6);  // every 4th acceptance
    for (const auto& inst : r.scale.instances) {
      CHECK(inst.accepted());
      CHECK(inst.trajectory.reward == 1.0);
    }
    CHECK(r.scale.manifest["accepted"] == 24);
  }

  SUBCASE("audit_rate 0 disables the drift watch with a warning") {
    auto backend = standard_backend();
    ThreePhaseOptions opt;
    opt.prompt_sets = 2;
    opt.n_target = 12;
    opt.batch_size = 8;
    opt.audit_rate = 0.0;
    opt.seed = 11;
    ThreePhaseResult r = run_three_phase(environment, opt, backend);
    CHECK(r.scale.accepted == 12);
    REQUIRE_FALSE(r.scale.audit_log.empty());
    CHECK(r.scale.audit_log[0]["event"] == "warning");
    for (const auto& e : r.scale.audit_log) CHECK(e["event"] != "audit");
  }

  SUBCASE("a transient defect burst pauses the set, re-pilots and resumes") {
    MockTuning tuning;
    tuning.drift_start = 30;
    tuning.drift_end = 36;
    auto backend = standard_backend(tuning);
    ThreePhaseOptions opt;
    opt.prompt_sets = 2;
    opt.n_target = 60;
    opt.batch_size = 8;
    opt.audit_rate = 1.0;
    opt.seed = 7;
    ThreePhaseResult r = run_three_phase(environment, opt, backend);
    CHECK(r.scale.accepted == 60);
    CHECK(r.scale.drift_pauses >= 1);
    bool saw_pause = false, saw_resume = false, saw_novel = false;
    for (const auto& e : r.scale.audit_log) {
      if (e["event"] == "drift_pause") {
        saw_pause = true;
        for (const auto& c : e["novel"]) saw_novel |= c == "unknown_tool";
      }
      if (e["event"] == "drift_resume") saw_resume = true;
    }
    CHECK(saw_pause);
    CHECK(saw_resume);
    CHECK(saw_novel);
  }

  SUBCASE("drift that survives its re-pilot aborts the run") {
    MockTuning tuning;
    tuning.drift_start = 10;
    tuning.drift_sticky = true;
    auto backend = standard_backend(tuning);
    ThreePhaseOptions opt;
    opt.prompt_sets = 2;
    opt.n_target = 60;
    opt.batch_size = 8;
    opt.audit_rate = 1.0;
    opt.seed = 7;
    CHECK_THROWS_AS(run_three_phase(environment, opt, backend), DriftUnrecoverable);
  }

  SUBCASE("pilot divergence at a phase boundary aborts the run") {
    MockTuning stuck;
    stuck.infeasible_floor = 0.5;
    auto backend = standard_backend(stuck);
    ThreePhaseOptions opt;
    opt.prompt_sets = 1;
    opt.n_target = 8;
    opt.batch_size = 8;
    opt.seed = 7;
    CHECK_THROWS_AS(run_three_phase(environment, opt, backend), PilotDiverged);
  }
}

TEST_CASE("archived runs are byte-reproducible") {
  namespace fs = std::filesystem;
  auto environment = airline_env();
  const fs::path root = fs::temp_directory_path() / "duet_synth_repro";
  fs::remove_all(root);

  auto run_into = [&](const std::string& dir) {
    auto backend = standard_backend();
    ThreePhaseOptions opt;
    opt.prompt_sets = 2;
    opt.n_target = 12;
    opt.batch_size = 8;
    opt.audit_rate = 0.25;
    opt.seed = 11;
    opt.archive_dir = (root / dir).string();
    return run_three_phase(environment, opt, backend);
  };
  run_into("a");
  run_into("b");

  std::vector<fs::path> rel;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (entry.is_regular_file()) rel.push_back(fs::relative(entry.path(), root / "a"));
  }
  std::sort(rel.begin(), rel.end());
  REQUIRE(rel.size() >= 4);  // manifest, audit log, trajectories, instances

  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
  };
  for (const auto& r : rel) {
    REQUIRE(fs::exists(root / "b" / r));
    CHECK(slurp(root / "a" / r) == slurp(root / "b" / r));
  }
  fs::remove_all(root);
}

#include "duet/synth/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <exception>
#include <filesystem>
#include <limits>
#include <set>
#include <thread>

#include "duet/errors.hpp"
#include "duet/jsonl.hpp"
#include "duet/rng.hpp"

namespace duet::synth {

namespace {

constexpr const char* kPlannerPrompt =
    "You are the workflow planner. Given a generation request and the domain's "
    "tool registry, emit the stage chain as JSON: an ordered \"stages\" list "
    "plus \"max_repair\" and \"max_prompt_iterations\" loop bounds. Every "
    "draft must end at checker construction; repairs are bounded, never open "
    "loops.";

constexpr const char* kPromptEngineerPrompt =
    "You are the prompt engineer. Produce or refine the per-worker prompt "
    "bundle as JSON {\"prompts\": {worker: text}}. When earlier set summaries "
    "are given, differentiate the new set from all of them; when critiques "
    "are given, fold the recurring defect categories into the responsible "
    "workers' prompts.";

constexpr const char* kJudgePrompt =
    "You are the judge. Score the artifact on executability, tool "
    "correctness, trajectory coherence and difficulty coverage, each in "
    "[0, 1], as JSON, with a findings list citing concrete evidence.";

json worker_messages(const std::string& prompt, const std::string& instruction) {
  return json::array({json{{"role", "system"}, {"content", prompt}},
                      json{{"role", "user"}, {"content", instruction}}});
}

json parse_reply(Worker worker, const std::string& raw) {
  try {
    return json::parse(raw);
  } catch (const json::parse_error& e) {
    throw BackendError("worker " + worker_name(worker) +
                       " returned unparseable JSON: " + e.what());
  }
}

double score_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw BadSpec(std::string("judge reply lacks numeric ") + key);
  }
  return j[key].get<double>();
}

std::vector<std::string> sorted_categories(const std::vector<Critique>& critiques) {
  std::set<std::string> cats;
  for (const auto& c : critiques) {
    for (const auto& f : c.findings) cats.insert(f.category);
  }
  return {cats.begin(), cats.end()};
}

}  // namespace

json PilotMetrics::to_json() const {
  return json{{"iteration", iteration},
              {"version", version},
              {"infeasibility_rate", infeasibility_rate},
              {"tool_call_validity", tool_call_validity},
              {"judge_mean", judge_mean},
              {"repair_mean", repair_mean},
              {"accepted", accepted},
              {"batch", batch}};
}

WorkflowPlan plan_workflow(const std::string& request, const env::Domain& domain,
                           const json& targets, ChatBackend& backend) {
  json meta{{"targets", targets}, {"domain", domain.name()}};
  const std::string instruction =
      "Request: " + request + "\nDomain: " + domain.name() + " with " +
      std::to_string(domain.tools().size()) + " tools.\nTargets: " + canonical(targets);
  BackendRequest req{Worker::planner, worker_messages(kPlannerPrompt, instruction), meta};
  json reply = parse_reply(Worker::planner, backend.complete(req));
  WorkflowPlan plan = WorkflowPlan::from_json(reply);
  if (targets.is_object() && targets.contains("max_repair")) {
    plan.max_repair = targets["max_repair"].get<int>();
  }
  if (targets.is_object() && targets.contains("max_prompt_iterations")) {
    plan.max_prompt_iterations = targets["max_prompt_iterations"].get<int>();
  }
  plan.validate();
  return plan;
}

std::string summarize_prompt_set(const PromptSet& set) {
  const std::string& intent = set.prompt_for(Worker::user_intent);
  const size_t nl = intent.find_last_of('\n');
  std::string tail = nl == std::string::npos ? intent : intent.substr(nl + 1);
  if (tail.size() > 120) tail = tail.substr(0, 120);
  return "set " + std::to_string(set.set_id) + " v" + std::to_string(set.version) +
         ": " + tail;
}

PromptSet generate_prompt_set(const WorkflowPlan& plan,
                              const std::vector<std::string>& prior_summaries,
                              int k_index, ChatBackend& backend) {
  plan.validate();
  json summaries = json::array();
  std::string listing;
  for (const auto& s : prior_summaries) {
    summaries.push_back(s);
    listing += "\n- " + s;
  }
  json meta{{"mode", "init"}, {"k", k_index}, {"summaries", summaries}};
  const std::string instruction =
      "Write prompt set " + std::to_string(k_index) + " for the workflow." +
      (prior_summaries.empty() ? std::string("\nNo earlier sets.")
                               : "\nDiversify against:" + listing);
  BackendRequest req{Worker::prompt_engineer,
                     worker_messages(kPromptEngineerPrompt, instruction), meta};
  json reply = parse_reply(Worker::prompt_engineer, backend.complete(req));
  if (!reply.contains("prompts") || !reply["prompts"].is_object()) {
    throw BackendError("prompt engineer reply lacks a prompts object");
  }
  PromptSet set;
  set.set_id = k_index;
  set.version = 1;
  for (const auto& [worker, text] : reply["prompts"].items()) {
    set.prompts[worker] = text.get<std::string>();
  }
  set.validate();
  return set;
}

PromptSet evolve(const PromptSet& set, const std::vector<Critique>& critiques,
                 ChatBackend& backend) {
  if (critiques.empty()) {
    throw BadConfig("prompt evolution requires at least one critique");
  }
  set.validate();
  json prompts = json::object();
  for (const auto& [worker, text] : set.prompts) prompts[worker] = text;
  const std::vector<std::string> categories = sorted_categories(critiques);
  json cats = json::array();
  for (const auto& c : categories) cats.push_back(c);

  json meta{{"mode", "evolve"},
            {"new_version", set.version + 1},
            {"prompts", prompts},
            {"categories", cats}};
  std::string instruction = "Evolve the prompt set. Recurring defect categories:";
  for (const auto& c : categories) instruction += " " + c;
  BackendRequest req{Worker::prompt_engineer,
                     worker_messages(kPromptEngineerPrompt, instruction), meta};
  json reply = parse_reply(Worker::prompt_engineer, backend.complete(req));
  if (!reply.contains("prompts") || !reply["prompts"].is_object()) {
    throw BackendError("prompt engineer reply lacks a prompts object");
  }

  PromptSet next;
  next.set_id = set.set_id;
  next.version = set.version + 1;
  for (const auto& [worker, text] : reply["prompts"].items()) {
    next.prompts[worker] = text.get<std::string>();
  }
  next.lineage = set.lineage;
  PromptSet::LineageStep step;
  step.from_version = set.version;
  for (const auto& c : critiques) step.critique_ids.push_back(c.id);
  next.lineage.push_back(std::move(step));
  next.validate();
  return next;
}

Critique judge_instance(const SynthesisInstance& instance, int version,
                        ChatBackend& backend) {
  json cats = json::array();
  for (const auto& c : instance.error_categories) cats.push_back(c);
  json meta{{"set", instance.set_id},
            {"version", version},
            {"instance", instance.index},
            {"artifact", instance.artifact_id()},
            {"infeasible_initially", instance.infeasible_initially},
            {"repair_count", instance.repair_count},
            {"categories", cats}};
  const std::string instruction =
      "Score artifact " + instance.artifact_id() + " (termination: " +
      instance.trajectory.termination + ", tool calls: " +
      std::to_string(instance.tool_calls_valid) + "/" +
      std::to_string(instance.tool_calls_total) + ").";

  auto attempt = [&]() -> Critique {
    BackendRequest req{Worker::judge, worker_messages(kJudgePrompt, instruction), meta};
    json reply = parse_reply(Worker::judge, backend.complete(req));
    Critique c;
    c.id = "crit-" + instance.artifact_id() + "-v" + std::to_string(version);
    c.target = instance.artifact_id();
    c.executability = score_field(reply, "executability");
    c.tool_correctness = score_field(reply, "tool_correctness");
    c.trajectory_coherence = score_field(reply, "trajectory_coherence");
    c.difficulty_coverage = score_field(reply, "difficulty_coverage");
    for (const auto& fj : reply.value("findings", json::array())) {
      c.findings.push_back(Finding::from_json(fj));
    }
    c.validate();
    return c;
  };

  try {
    return attempt();
  } catch (const Error&) {
    // One retry; a backend that cannot produce a usable critique twice gets
    // a zero score rather than stalling the loop.
  }
  try {
    return attempt();
  } catch (const Error&) {
    Critique zero;
    zero.id = "crit-" + instance.artifact_id() + "-v" + std::to_string(version);
    zero.target = instance.artifact_id();
    return zero;
  }
}

PilotResult run_pilot(const env::Environment& environment, const WorkflowPlan& plan,
                      PromptSet set, int batch_size, const PilotCriteria& criteria,
                      ChatBackend& backend, uint64_t seed, bool repilot) {
  if (batch_size < 5 || batch_size > 20) {
    throw BadConfig("pilot batch size must be in [5, 20], got " +
                    std::to_string(batch_size));
  }
  plan.validate();
  set.validate();

  PilotResult result;
  result.set = std::move(set);
  std::set<std::string> known;
  double prev_mean = std::numeric_limits<double>::quiet_NaN();

  for (int iteration = 1; iteration <= plan.max_prompt_iterations; ++iteration) {
    std::vector<SynthesisInstance> batch;
    std::vector<Critique> critiques;
    batch.reserve(batch_size);

    int infeasible = 0, accepted = 0, repairs = 0;
    long long calls_total = 0, calls_valid = 0;
    double judge_sum = 0.0;

    for (int i = 0; i < batch_size; ++i) {
      InstanceContext ctx;
      ctx.index = (iteration - 1) * batch_size + i;
      ctx.seed = hash_mix(seed, "pilot-instance",
                          static_cast<uint64_t>(iteration) * 1000ull +
                              static_cast<uint64_t>(i));
      ctx.phase = "pilot";
      ctx.repilot = repilot;
      SynthesisInstance inst =
          run_instance(environment, plan, result.set, backend, ctx);

      infeasible += inst.infeasible_initially ? 1 : 0;
      accepted += inst.accepted() ? 1 : 0;
      repairs += inst.repair_count;
      calls_total += inst.tool_calls_total;
      calls_valid += inst.tool_calls_valid;
      for (const auto& c : inst.error_categories) known.insert(c);

      Critique crit = judge_instance(inst, result.set.version, backend);
      judge_sum += crit.mean_score();
      critiques.push_back(std::move(crit));
      batch.push_back(std::move(inst));
    }

    PilotMetrics m;
    m.iteration = iteration;
    m.version = result.set.version;
    m.batch = batch_size;
    m.infeasibility_rate = static_cast<double>(infeasible) / batch_size;
    m.tool_call_validity =
        calls_total == 0 ? 0.0
                         : static_cast<double>(calls_valid) / static_cast<double>(calls_total);
    m.judge_mean = judge_sum / batch_size;
    m.repair_mean = static_cast<double>(repairs) / batch_size;
    m.accepted = accepted;
    result.history.push_back(m);

    const bool stable = !std::isnan(prev_mean) &&
                        std::abs(m.judge_mean - prev_mean) < criteria.max_score_delta;
    if (iteration >= criteria.min_iterations &&
        m.infeasibility_rate <= criteria.max_infeasibility &&
        m.tool_call_validity >= criteria.min_tool_validity && stable) {
      result.converged = true;
      result.baseline_repair_mean = m.repair_mean;
      break;
    }
    prev_mean = m.judge_mean;
    result.baseline_repair_mean = m.repair_mean;
    if (iteration < plan.max_prompt_iterations) {
      result.set = evolve(result.set, critiques, backend);
    }
  }

  result.known_categories.assign(known.begin(), known.end());
  return result;
}

namespace {

struct SetState {
  PromptSet set;
  std::set<std::string> known;
  double baseline = 0.0;
  std::deque<double> repair_window;  // repair counts of audited instances
  int pauses = 0;
};

}  // namespace

ScaleResult run_scale(const env::Environment& environment, const WorkflowPlan& plan,
                      std::vector<PilotResult> pilots, const ScaleOptions& options,
                      ChatBackend& backend) {
  if (pilots.empty()) throw BadConfig("scale phase needs at least one piloted set");
  if (options.n_target <= 0) throw BadConfig("scale n_target must be positive");
  plan.validate();

  const int K = static_cast<int>(pilots.size());
  std::vector<SetState> states(K);
  for (int k = 0; k < K; ++k) {
    states[k].set = pilots[k].set;
    states[k].known.insert(pilots[k].known_categories.begin(),
                           pilots[k].known_categories.end());
    states[k].baseline = pilots[k].baseline_repair_mean;
  }

  ScaleResult result;
  const int stride =
      options.audit_rate > 0.0
          ? std::max(1, static_cast<int>(std::lround(1.0 / options.audit_rate)))
          : 0;
  if (stride == 0) {
    result.audit_log.push_back(
        json{{"event", "warning"},
             {"message", "audit_rate 0 disables the drift watch entirely"}});
  }

  const int max_attempts = options.max_attempts_factor * options.n_target;
  int global_index = 0;

  while (result.accepted < options.n_target) {
    if (result.attempted >= max_attempts) {
      throw BackendError("scale generation exhausted its attempt budget (" +
                         std::to_string(max_attempts) + ") before reaching n_target");
    }
    const int k = global_index % K;
    SetState& st = states[k];

    InstanceContext ctx;
    ctx.index = global_index;
    ctx.seed = hash_mix(options.seed, "scale-instance",
                        static_cast<uint64_t>(global_index));
    ctx.phase = "scale";
    global_index += 1;

    SynthesisInstance inst = run_instance(environment, plan, st.set, backend, ctx);
    result.attempted += 1;

    if (!inst.accepted()) {
      result.audit_log.push_back(json{{"event", "discard"},
                                      {"instance", inst.artifact_id()},
                                      {"set", k},
                                      {"reason", inst.discard_reason}});
      continue;
    }

    result.accepted += 1;
    result.instances.push_back(inst);

    if (stride == 0 || result.accepted % stride != 0) continue;

    Critique crit = judge_instance(inst, st.set.version, backend);
    json cats = json::array();
    for (const auto& c : inst.error_categories) cats.push_back(c);
    result.audit_log.push_back(json{{"event", "audit"},
                                    {"instance", inst.artifact_id()},
                                    {"set", k},
                                    {"version", st.set.version},
                                    {"judge_mean", crit.mean_score()},
                                    {"repair_count", inst.repair_count},
                                    {"categories", cats}});

    st.repair_window.push_back(static_cast<double>(inst.repair_count));
    if (st.repair_window.size() > 20) st.repair_window.pop_front();

    std::vector<std::string> novel;
    for (const auto& c : inst.error_categories) {
      if (!st.known.count(c)) novel.push_back(c);
    }
    double repair_mean = 0.0;
    for (double r : st.repair_window) repair_mean += r;
    repair_mean /= static_cast<double>(st.repair_window.size());
    const double surge_threshold = 2.0 * std::max(st.baseline, 0.25);
    const bool surge =
        st.repair_window.size() >= 3 && repair_mean > surge_threshold;

    if (novel.empty() && !surge) continue;

    // Drift: pause this set and re-pilot it locally before continuing.
    result.drift_pauses += 1;
    st.pauses += 1;
    json novel_json = json::array();
    for (const auto& c : novel) novel_json.push_back(c);
    result.audit_log.push_back(
        json{{"event", "drift_pause"},
             {"set", k},
             {"reason", novel.empty() ? "repair_surge" : "novel_categories"},
             {"novel", novel_json},
             {"window_repair_mean", repair_mean},
             {"baseline_repair_mean", st.baseline}});

    PilotResult local = run_pilot(
        environment, plan, st.set, options.batch_size, options.criteria, backend,
        hash_mix(options.seed, "repilot",
                 static_cast<uint64_t>(k) * 100ull + static_cast<uint64_t>(st.pauses)),
        /*repilot=*/true);
    if (!local.converged) {
      throw DriftUnrecoverable("set " + std::to_string(k) +
                               " drifted and its local re-pilot did not converge");
    }
    st.set = local.set;
    st.known.insert(local.known_categories.begin(), local.known_categories.end());
    // The categories that triggered the pause have been adjudicated by the
    // re-pilot; seeing them again is no longer novel.
    st.known.insert(novel.begin(), novel.end());
    st.baseline = local.baseline_repair_mean;
    st.repair_window.clear();
    result.audit_log.push_back(json{{"event", "drift_resume"},
                                    {"set", k},
                                    {"version", st.set.version},
                                    {"baseline_repair_mean", st.baseline}});
  }

  json set_summaries = json::array();
  for (int k = 0; k < K; ++k) {
    json known = json::array();
    for (const auto& c : states[k].known) known.push_back(c);
    set_summaries.push_back(json{{"set_id", states[k].set.set_id},
                                 {"version", states[k].set.version},
                                 {"known_categories", known},
                                 {"pauses", states[k].pauses}});
    result.sets.push_back(states[k].set);
  }
  result.manifest = json{{"n_target", options.n_target},
                         {"accepted", result.accepted},
                         {"attempted", result.attempted},
                         {"drift_pauses", result.drift_pauses},
                         {"audit_stride", stride},
                         {"seed", options.seed},
                         {"sets", set_summaries}};

  if (!options.archive_dir.empty()) {
    namespace fs = std::filesystem;
    const fs::path root(options.archive_dir);
    fs::create_directories(root / "instances");
    write_text_file((root / "manifest.json").string(), result.manifest.dump(2) + "\n");

    std::vector<json> rows;
    for (const auto& inst : result.instances) {
      const fs::path dir = root / "instances" / ("set-" + std::to_string(inst.set_id));
      fs::create_directories(dir);
      write_text_file((dir / ("instance-" + std::to_string(inst.index) + ".json")).string(),
                      canonical(inst.to_json()) + "\n");
      rows.push_back(inst.trajectory.to_json());
    }
    write_jsonl_file((root / "trajectories.jsonl").string(), rows);
    std::vector<json> audit_rows(result.audit_log.begin(), result.audit_log.end());
    write_jsonl_file((root / "audit_log.jsonl").string(), audit_rows);
  }

  return result;
}

ThreePhaseResult run_three_phase(const env::Environment& environment,
                                 const ThreePhaseOptions& options, ChatBackend& backend) {
  if (options.prompt_sets <= 0) throw BadConfig("prompt_sets must be positive");

  ThreePhaseResult result;
  result.plan = plan_workflow(options.request, environment.domain(), options.targets,
                              backend);

  // Phase 1: K prompt sets, each conditioned on summaries of the earlier ones.
  std::vector<PromptSet> sets;
  std::vector<std::string> summaries;
  for (int k = 0; k < options.prompt_sets; ++k) {
    PromptSet set = generate_prompt_set(result.plan, summaries, k, backend);
    summaries.push_back(summarize_prompt_set(set));
    sets.push_back(std::move(set));
  }

  // Phase 2: pilots, parallel across sets. Each pilot's seed depends only on
  // its set index, so scheduling cannot change any outcome.
  result.pilots.resize(options.prompt_sets);
  std::vector<std::exception_ptr> errors(options.prompt_sets);
  const int threads = std::max(1, options.pilot_threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      for (int k = t; k < options.prompt_sets; k += threads) {
        try {
          result.pilots[k] =
              run_pilot(environment, result.plan, sets[k], options.batch_size,
                        options.criteria, backend,
                        hash_mix(options.seed, "set", static_cast<uint64_t>(k)));
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (int k = 0; k < options.prompt_sets; ++k) {
    if (errors[k]) std::rethrow_exception(errors[k]);
  }
  for (int k = 0; k < options.prompt_sets; ++k) {
    if (!result.pilots[k].converged) {
      throw PilotDiverged("prompt set " + std::to_string(k) +
                          " hit the iteration cap without meeting the pilot criteria");
    }
  }

  // Phase 3: monitored scale-up.
  ScaleOptions scale;
  scale.n_target = options.n_target;
  scale.audit_rate = options.audit_rate;
  scale.batch_size = options.batch_size;
  scale.seed = hash_mix(options.seed, "scale");
  scale.archive_dir = options.archive_dir;
  scale.criteria = options.criteria;
  result.scale = run_scale(environment, result.plan, result.pilots, scale, backend);
  return result;
}

}  // namespace duet::synth

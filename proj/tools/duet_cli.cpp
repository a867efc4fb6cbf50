// duet: command-line surface over the environment, rollout, verification,
// training, synthesis and benchmark layers. One verb per capability; all
// runs are seeded and reproducible.
//
// Exit codes: 0 success, 1 verification gate failed, 2 config/runtime error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "duet/bench/runner.hpp"
#include "duet/env/env.hpp"
#include "duet/errors.hpp"
#include "duet/grpo/train.hpp"
#include "duet/jsonl.hpp"
#include "duet/policy/remote.hpp"
#include "duet/policy/scripted.hpp"
#include "duet/policy/toy.hpp"
#include "duet/rollout/group.hpp"
#include "duet/rollout/sft.hpp"
#include "duet/synth/engine.hpp"
#include "duet/synth/mock_backend.hpp"
#include "duet/verify/verify.hpp"

namespace fs = std::filesystem;
using namespace duet;

namespace {

// --- task loading ---------------------------------------------------------

void collect_tasks_from_json(const json& j, std::vector<env::TaskSpec>& out) {
  if (j.is_array()) {
    for (const auto& item : j) collect_tasks_from_json(item, out);
    return;
  }
  if (!j.is_object()) throw BadConfig("task file: expected an object or array");
  if (j.contains("task") && j["task"].is_object()) {
    // Synthesis archive instance: the task rides inside.
    out.push_back(env::TaskSpec::from_json(j["task"]));
    return;
  }
  out.push_back(env::TaskSpec::from_json(j));
}

std::vector<env::TaskSpec> load_tasks(const std::string& spec) {
  std::vector<env::TaskSpec> tasks;
  if (spec == "builtin:toy-cancel") {
    tasks.push_back(env::builtin_toy_cancel_task());
    return tasks;
  }
  fs::path path(spec);
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) collect_tasks_from_json(read_json_file(file.string()), tasks);
  } else if (fs::is_regular_file(path)) {
    collect_tasks_from_json(read_json_file(spec), tasks);
  } else {
    throw BadConfig("--tasks: no such file or directory: " + spec);
  }
  if (tasks.empty()) throw BadConfig("--tasks: no tasks found under " + spec);
  return tasks;
}

// --- policy factories -----------------------------------------------------

struct PolicySpec {
  std::string kind;  // "toy" | "scripted" | "remote" | "greeting"
  std::string arg;   // file path or base url
};

PolicySpec parse_policy_spec(const std::string& text) {
  auto colon = text.find(':');
  std::string kind = colon == std::string::npos ? text : text.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "toy" || kind == "greeting") {
    if (!arg.empty()) throw BadConfig("policy '" + kind + "' takes no argument");
    return {kind, ""};
  }
  if (kind == "scripted") {
    if (arg.empty()) throw BadConfig("scripted policy needs a file: scripted:FILE");
    return {kind, arg};
  }
  if (kind == "remote") {
    if (arg.empty()) throw BadConfig("remote policy needs a url: remote:http://...");
    // The scheme's colon was split off above; stitch the url back together.
    return {kind, arg};
  }
  throw BadConfig("unknown policy spec '" + text +
                  "' (expected toy, greeting, scripted:FILE or remote:URL)");
}

policy::PolicyFactory make_agent_factory(const std::string& spec_text,
                                         const env::Environment& environment,
                                         const env::TaskSpec& task,
                                         const std::string& params_file) {
  PolicySpec spec = parse_policy_spec(spec_text);
  if (spec.kind == "toy") {
    std::shared_ptr<const policy::ToyParams> params;
    if (params_file.empty()) {
      const policy::ToyVocab vocab = policy::ToyVocab::for_domain(environment.domain());
      params = std::make_shared<const policy::ToyParams>(
          policy::ToyParams(policy::kToyFeatureCount, vocab.size()));
    } else {
      params = std::make_shared<const policy::ToyParams>(
          policy::ToyParams::from_json(read_json_file(params_file)));
    }
    const env::Domain& domain = environment.domain();
    return [params, &domain, &task] { return policy::ToyPolicy::for_task(params, domain, task); };
  }
  if (spec.kind == "scripted") {
    auto script = std::make_shared<policy::ScriptedPolicy>(policy::ScriptedPolicy::load_file(spec.arg));
    if (script->role() != env::Role::agent) {
      throw BadConfig("--agent scripted:" + spec.arg + " is not an agent script");
    }
    return [script] { return std::make_unique<policy::ScriptedPolicy>(*script); };
  }
  if (spec.kind == "remote") {
    policy::ChatConfig config;
    config.base_url = spec.arg;
    return [config] { return std::make_unique<policy::RemotePolicy>(env::Role::agent, config); };
  }
  throw BadConfig("--agent does not accept '" + spec.kind + "'");
}

policy::PolicyFactory make_user_factory(const std::string& spec_text) {
  PolicySpec spec = parse_policy_spec(spec_text);
  if (spec.kind == "greeting") {
    return [] {
      return std::make_unique<policy::ScriptedPolicy>(policy::ScriptedPolicy::greeting_user());
    };
  }
  if (spec.kind == "scripted") {
    auto script = std::make_shared<policy::ScriptedPolicy>(policy::ScriptedPolicy::load_file(spec.arg));
    if (script->role() != env::Role::user) {
      throw BadConfig("--user scripted:" + spec.arg + " is not a user script");
    }
    return [script] { return std::make_unique<policy::ScriptedPolicy>(*script); };
  }
  if (spec.kind == "remote") {
    policy::ChatConfig config;
    config.base_url = spec.arg;
    return [config] { return std::make_unique<policy::RemotePolicy>(env::Role::user, config); };
  }
  throw BadConfig("--user does not accept '" + spec.kind + "'");
}

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw BadConfig("--out is required");
  fs::create_directories(dir);
}

// --- verbs ----------------------------------------------------------------

struct RolloutArgs {
  std::string domain = "toy";
  std::string tasks;
  std::string agent = "toy";
  std::string user = "greeting";
  std::string params_file;
  std::string out;
  int n_trials = 4;
  int max_records = 40;
  int workers = 1;
  uint64_t seed = 0;
};

int cmd_rollout(const RolloutArgs& args) {
  env::Environment environment(env::Domain::named_or_file(args.domain));
  std::vector<env::TaskSpec> tasks = load_tasks(args.tasks);
  ensure_dir(args.out);

  std::vector<json> rows;
  int succeeded = 0, total = 0;
  for (const auto& task : tasks) {
    rollout::GroupOptions options;
    options.group_size = args.n_trials;
    options.base_seed = hash_mix(args.seed, task.id);
    options.worker_cap = args.workers;
    options.episode.max_records = args.max_records;
    if (task.checker_spec) options.episode.scorer = verify::make_scorer(environment, task);

    auto make_agent = make_agent_factory(args.agent, environment, task, args.params_file);
    auto make_user = make_user_factory(args.user);
    auto episodes = rollout::sample_group(environment, task, make_agent, make_user, options);
    for (size_t g = 0; g < episodes.size(); ++g) {
      const auto& trajectory = episodes[g].trajectory;
      json row;
      row["task_id"] = task.id;
      row["trial"] = g;
      row["seed"] = hash_mix(options.base_seed, static_cast<uint64_t>(g));
      row["reward"] = trajectory.reward;
      row["termination"] = trajectory.termination;
      row["trajectory"] = trajectory.to_json();
      rows.push_back(std::move(row));
      ++total;
      if (trajectory.reward == 1.0) ++succeeded;
    }
  }
  const std::string out_file = (fs::path(args.out) / "trajectories.jsonl").string();
  write_jsonl_file(out_file, rows);
  std::printf("rollout: %d episodes over %zu tasks, %d verified successes -> %s\n", total,
              tasks.size(), succeeded, out_file.c_str());
  return 0;
}

struct VerifyArgs {
  std::string domain = "toy";
  std::string tasks;
  std::string trajectories;
  std::string out;
  bool allow_failures = false;
};

int cmd_verify(const VerifyArgs& args) {
  env::Environment environment(env::Domain::named_or_file(args.domain));
  std::vector<env::TaskSpec> tasks = load_tasks(args.tasks);
  std::vector<json> rows = read_jsonl_file(args.trajectories);

  std::vector<json> reports;
  int passed = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    const json& row = rows[i];
    const std::string task_id = row.value("task_id", "");
    auto it = std::find_if(tasks.begin(), tasks.end(),
                           [&](const env::TaskSpec& t) { return t.id == task_id; });
    if (it == tasks.end()) {
      throw BadConfig("trajectory row " + std::to_string(i) + ": unknown task '" + task_id + "'");
    }
    rollout::Trajectory trajectory = rollout::Trajectory::from_json(row.at("trajectory"));
    verify::VerificationReport report = verify::evaluate_submission(environment, *it, trajectory);
    if (report.overall_pass) ++passed;
    json out;
    out["task_id"] = task_id;
    out["row"] = i;
    out["report"] = report.to_json();
    reports.push_back(std::move(out));
  }
  if (!args.out.empty()) write_jsonl_file(args.out, reports);
  std::printf("verify: %d/%zu trajectories passed\n", passed, rows.size());
  if (passed < static_cast<int>(rows.size()) && !args.allow_failures) return 1;
  return 0;
}

struct TrainArgs {
  std::string out;
  int iterations = 300;
  int groups = 4;
  int group_size = 8;
  double learning_rate = 40.0;
  double epsilon = 0.2;
  bool no_filter = false;
  double stop_at_mean = 0.9;
  uint64_t seed = 0;
  int workers = 1;
  int eval_episodes = 200;
};

int cmd_train_toy(const TrainArgs& args) {
  env::Environment environment(env::Domain::builtin_toy());
  env::TaskSpec task = env::builtin_toy_cancel_task();
  ensure_dir(args.out);

  grpo::TrainConfig config;
  config.iterations = args.iterations;
  config.groups_per_iteration = args.groups;
  config.group_size = args.group_size;
  config.learning_rate = args.learning_rate;
  config.epsilon = args.epsilon;
  config.dynamic_filter_enabled = !args.no_filter;
  config.seed = args.seed;
  config.worker_cap = args.workers;
  config.stop_at_mean = args.stop_at_mean;

  grpo::TrainResult result = grpo::train_toy(environment, task, config);
  const std::string params_file = (fs::path(args.out) / "params.json").string();
  const std::string curve_file = (fs::path(args.out) / "curve.csv").string();
  write_text_file(params_file, result.params.to_json().dump(2) + "\n");
  grpo::write_curve_csv(curve_file, result.curve);

  double trained = grpo::evaluate_toy_policy(environment, task, result.params,
                                             args.eval_episodes, hash_mix(args.seed, 1ull),
                                             config.max_records, args.workers);
  std::printf("train-toy: %zu iterations, final eval %.3f over %d episodes -> %s\n",
              result.curve.size(), trained, args.eval_episodes, args.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string domain = "toy";
  std::string tasks;
  std::string agent = "toy";
  std::string user = "greeting";
  std::string params_file;
  std::string out;
  int n_trials = 4;
  std::vector<int> ks;
  int max_records = 40;
  int workers = 1;
  uint64_t seed = 0;
  bool partition = false;
};

int cmd_eval(const EvalArgs& args) {
  env::Environment environment(env::Domain::named_or_file(args.domain));
  std::vector<env::TaskSpec> tasks = load_tasks(args.tasks);
  ensure_dir(args.out);

  bench::BenchmarkConfig config;
  config.n_trials = args.n_trials;
  if (!args.ks.empty()) config.ks = args.ks;
  config.ks.erase(std::unique(config.ks.begin(), config.ks.end()), config.ks.end());
  config.seed = args.seed;
  config.worker_cap = args.workers;
  config.max_records = args.max_records;

  // All tasks share one agent spec; the toy policy binds per task.
  auto make_user = make_user_factory(args.user);
  bench::EvalReport report;
  report.n_trials = config.n_trials;
  report.ks = config.ks;
  for (const auto& task : tasks) {
    auto make_agent = make_agent_factory(args.agent, environment, task, args.params_file);
    bench::EvalReport one =
        bench::run_benchmark(environment, {task}, make_agent, make_user, config);
    report.rows.push_back(std::move(one.rows[0]));
  }

  json report_json = report.to_json();
  report_json["seed"] = args.seed;
  report_json["domain"] = args.domain;
  report_json["agent"] = args.agent;
  report_json["user"] = args.user;
  if (args.partition) {
    bench::TrialMatrix m = report.matrix();
    json part = json::object();
    for (int k : config.ks) part[std::to_string(k)] = bench::partition_pass_hat_k(m, k);
    report_json["partition_pass_hat_k"] = std::move(part);
  }
  write_text_file((fs::path(args.out) / "report.json").string(), report_json.dump(2) + "\n");
  write_text_file((fs::path(args.out) / "report.txt").string(), report.table());
  std::printf("%s", report.table().c_str());
  std::printf("eval: %zu tasks x %d trials -> %s\n", tasks.size(), config.n_trials,
              args.out.c_str());
  return 0;
}

struct SynthArgs {
  std::string domain = "airline";
  std::string backend = "mock";
  std::string request = "Generate tool-use customer service tasks with dialogues.";
  std::string out;
  int sets = 4;
  int n_target = 50;
  int batch_size = 8;
  double audit_rate = 0.2;
  uint64_t seed = 0;
  int workers = 4;
};

int cmd_synth(const SynthArgs& args) {
  env::Domain domain = env::Domain::named_or_file(args.domain);
  env::Environment environment(domain);
  ensure_dir(args.out);

  std::unique_ptr<synth::ChatBackend> backend;
  if (args.backend == "mock") {
    backend = std::make_unique<synth::MockBackend>(domain, args.seed);
  } else if (args.backend.rfind("remote:", 0) == 0) {
    policy::ChatConfig config;
    config.base_url = args.backend.substr(7);
    backend = std::make_unique<synth::RemoteChatBackend>(config);
  } else {
    throw BadConfig("--backend must be 'mock' or 'remote:URL'");
  }

  synth::ThreePhaseOptions options;
  options.request = args.request;
  options.prompt_sets = args.sets;
  options.n_target = args.n_target;
  options.batch_size = args.batch_size;
  options.audit_rate = args.audit_rate;
  options.seed = args.seed;
  options.archive_dir = args.out;
  options.pilot_threads = args.workers;

  synth::ThreePhaseResult result = synth::run_three_phase(environment, options, *backend);
  std::printf("synth: %d accepted / %d attempted over %zu prompt sets, %d drift pauses -> %s\n",
              result.scale.accepted, result.scale.attempted, result.pilots.size(),
              result.scale.drift_pauses, args.out.c_str());
  return 0;
}

struct SftArgs {
  std::string domain = "toy";
  std::string tasks;
  std::string trajectories;
  std::string out;
  double min_reward = 1.0;
};

int cmd_export_sft(const SftArgs& args) {
  env::Environment environment(env::Domain::named_or_file(args.domain));
  std::vector<env::TaskSpec> tasks = load_tasks(args.tasks);
  std::vector<json> rows_in = read_jsonl_file(args.trajectories);
  if (args.out.empty()) throw BadConfig("--out is required");

  rollout::SftOptions options;
  options.min_reward = args.min_reward;

  std::vector<json> rows_out;
  for (const auto& task : tasks) {
    std::vector<rollout::Trajectory> trajectories;
    for (const auto& row : rows_in) {
      if (row.value("task_id", "") != task.id) continue;
      trajectories.push_back(rollout::Trajectory::from_json(row.at("trajectory")));
    }
    if (trajectories.empty()) continue;
    for (auto& row : rollout::export_sft(environment, task, trajectories, options)) {
      rows_out.push_back(std::move(row));
    }
  }
  rollout::write_sft_file(args.out, rows_out);
  std::printf("export-sft: %zu rows from %zu trajectories -> %s\n", rows_out.size(),
              rows_in.size(), args.out.c_str());
  return 0;
}

struct ConcatArgs {
  std::vector<std::string> inputs;
  std::string out;
  bool shuffle = false;
  uint64_t seed = 0;
};

// Mix-domain data assembly: concatenate JSONL row files, optionally with a
// seeded shuffle so domains interleave instead of forming long runs.
int cmd_concat(const ConcatArgs& args) {
  if (args.inputs.empty()) throw BadConfig("concat: at least one --inputs file required");
  if (args.out.empty()) throw BadConfig("--out is required");
  std::vector<json> rows;
  for (const auto& input : args.inputs) {
    for (auto& row : read_jsonl_file(input)) rows.push_back(std::move(row));
  }
  if (args.shuffle) {
    Rng rng(hash_mix(args.seed, "concat-shuffle"));
    for (size_t i = rows.size(); i > 1; --i) {
      std::swap(rows[i - 1], rows[rng.below(i)]);
    }
  }
  write_jsonl_file(args.out, rows);
  std::printf("concat: %zu rows from %zu files -> %s\n", rows.size(), args.inputs.size(),
              args.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale harness for tool-using dialogue agents"};
  app.require_subcommand(1);

  RolloutArgs rollout_args;
  auto* rollout_cmd = app.add_subcommand("rollout", "run seeded episode groups over tasks");
  rollout_cmd->add_option("--domain", rollout_args.domain, "domain name or fixture path");
  rollout_cmd->add_option("--tasks", rollout_args.tasks, "task file/dir or builtin:toy-cancel")
      ->required();
  rollout_cmd->add_option("--agent", rollout_args.agent, "toy | scripted:FILE | remote:URL");
  rollout_cmd->add_option("--user", rollout_args.user, "greeting | scripted:FILE | remote:URL");
  rollout_cmd->add_option("--params", rollout_args.params_file, "toy parameter table (json)");
  rollout_cmd->add_option("--n-trials", rollout_args.n_trials, "episodes per task");
  rollout_cmd->add_option("--max-records", rollout_args.max_records, "per-episode turn cap");
  rollout_cmd->add_option("--workers", rollout_args.workers, "rollout threads");
  rollout_cmd->add_option("--seed", rollout_args.seed, "root seed");
  rollout_cmd->add_option("--out", rollout_args.out, "output directory")->required();

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "replay and score recorded trajectories");
  verify_cmd->add_option("--domain", verify_args.domain, "domain name or fixture path");
  verify_cmd->add_option("--tasks", verify_args.tasks, "task file/dir or builtin:toy-cancel")
      ->required();
  verify_cmd->add_option("--trajectories", verify_args.trajectories, "trajectories.jsonl")
      ->required();
  verify_cmd->add_option("--out", verify_args.out, "write per-row reports (jsonl)");
  verify_cmd->add_flag("--allow-failures", verify_args.allow_failures,
                       "report failures without failing the exit code");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train-toy", "policy-gradient loop on the toy domain");
  train_cmd->add_option("--iterations", train_args.iterations, "max training iterations");
  train_cmd->add_option("--groups", train_args.groups, "groups per iteration");
  train_cmd->add_option("--group-size", train_args.group_size, "episodes per group");
  train_cmd->add_option("--lr", train_args.learning_rate, "learning rate");
  train_cmd->add_option("--epsilon", train_args.epsilon, "clip half-width");
  train_cmd->add_flag("--no-filter", train_args.no_filter, "keep all-equal-reward groups");
  train_cmd->add_option("--stop-at-mean", train_args.stop_at_mean,
                        "early-stop reward bar (0 disables)");
  train_cmd->add_option("--seed", train_args.seed, "root seed");
  train_cmd->add_option("--workers", train_args.workers, "rollout threads");
  train_cmd->add_option("--eval-episodes", train_args.eval_episodes, "final evaluation size");
  train_cmd->add_option("--out", train_args.out, "output directory")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "benchmark tasks and report trial metrics");
  eval_cmd->add_option("--domain", eval_args.domain, "domain name or fixture path");
  eval_cmd->add_option("--tasks", eval_args.tasks, "task file/dir or builtin:toy-cancel")
      ->required();
  eval_cmd->add_option("--agent", eval_args.agent, "toy | scripted:FILE | remote:URL");
  eval_cmd->add_option("--user", eval_args.user, "greeting | scripted:FILE | remote:URL");
  eval_cmd->add_option("--params", eval_args.params_file, "toy parameter table (json)");
  eval_cmd->add_option("--n-trials", eval_args.n_trials, "episodes per task");
  eval_cmd->add_option("--k", eval_args.ks, "metric k values (repeatable)");
  eval_cmd->add_option("--max-records", eval_args.max_records, "per-episode turn cap");
  eval_cmd->add_option("--workers", eval_args.workers, "rollout threads");
  eval_cmd->add_option("--seed", eval_args.seed, "root seed");
  eval_cmd->add_flag("--partition", eval_args.partition,
                     "also report the strict disjoint-block consistency estimator");
  eval_cmd->add_option("--out", eval_args.out, "output directory")->required();

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "three-phase synthetic task generation");
  synth_cmd->add_option("--domain", synth_args.domain, "domain name or fixture path");
  synth_cmd->add_option("--backend", synth_args.backend, "mock | remote:URL");
  synth_cmd->add_option("--request", synth_args.request, "natural-language generation request");
  synth_cmd->add_option("--sets", synth_args.sets, "diversified prompt sets (K)");
  synth_cmd->add_option("--n-target", synth_args.n_target, "accepted instances to produce");
  synth_cmd->add_option("--batch-size", synth_args.batch_size, "pilot batch size");
  synth_cmd->add_option("--audit-rate", synth_args.audit_rate, "fraction of acceptances audited");
  synth_cmd->add_option("--seed", synth_args.seed, "root seed");
  synth_cmd->add_option("--workers", synth_args.workers, "parallel pilot threads");
  synth_cmd->add_option("--out", synth_args.out, "archive directory")->required();

  SftArgs sft_args;
  auto* sft_cmd = app.add_subcommand("export-sft", "turn verified episodes into training rows");
  sft_cmd->add_option("--domain", sft_args.domain, "domain name or fixture path");
  sft_cmd->add_option("--tasks", sft_args.tasks, "task file/dir or builtin:toy-cancel")
      ->required();
  sft_cmd->add_option("--trajectories", sft_args.trajectories, "trajectories.jsonl")->required();
  sft_cmd->add_option("--min-reward", sft_args.min_reward, "keep rows at or above this reward");
  sft_cmd->add_option("--out", sft_args.out, "output jsonl file")->required();

  ConcatArgs concat_args;
  auto* concat_cmd = app.add_subcommand("concat", "assemble mixed-domain jsonl data");
  concat_cmd->add_option("--inputs", concat_args.inputs, "input jsonl files")->required();
  concat_cmd->add_option("--out", concat_args.out, "output jsonl file")->required();
  concat_cmd->add_flag("--shuffle", concat_args.shuffle, "seeded interleave of the rows");
  concat_cmd->add_option("--seed", concat_args.seed, "shuffle seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (rollout_cmd->parsed()) return cmd_rollout(rollout_args);
    if (verify_cmd->parsed()) return cmd_verify(verify_args);
    if (train_cmd->parsed()) return cmd_train_toy(train_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (synth_cmd->parsed()) return cmd_synth(synth_args);
    if (sft_cmd->parsed()) return cmd_export_sft(sft_args);
    if (concat_cmd->parsed()) return cmd_concat(concat_args);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}

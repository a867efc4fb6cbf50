#include "duet/synth/mock_backend.hpp"

#include <algorithm>
#include <iterator>
#include <cmath>

#include "duet/env/action.hpp"
#include "duet/errors.hpp"
#include "duet/policy/parse.hpp"
#include "duet/rng.hpp"
#include "duet/synth/prompts.hpp"
#include "duet/synth/types.hpp"

namespace duet::synth {

namespace {

// Everything below is grounded in the airline fixture: the ids name real
// entities and each "valid" row is chosen to clear the corresponding policy
// gate (insurance / cabin / booking age for cancellations, add-only counts
// for baggage, membership tier for compensation, seat availability and
// payment limits for bookings).

constexpr const char* kArchetypes[] = {"cancel", "baggage", "compensation", "book"};

struct CancelCase {
  const char* user;
  const char* res;
};
constexpr CancelCase kCancelCases[] = {
    {"usr_ben_002", "RES003"},  // travel insurance
    {"usr_ava_001", "RES002"},  // business cabin
    {"usr_ben_002", "RES004"},  // booked within 24h
    {"usr_gus_007", "RES010"},  // travel insurance
    {"usr_dev_004", "RES007"},  // travel insurance, two segments
};

struct BaggageCase {
  const char* user;
  const char* res;
  int total;
  int nonfree;
};
constexpr BaggageCase kBaggageCases[] = {
    {"usr_ava_001", "RES001", 2, 1},
    {"usr_cora_003", "RES005", 2, 0},
    {"usr_ivan_009", "RES013", 3, 1},
};

struct CompCase {
  const char* user;
  double amount;
};
constexpr CompCase kCompCases[] = {
    {"usr_ava_001", 100.0},   // gold
    {"usr_elena_005", 120.0}, // gold
    {"usr_femi_006", 80.0},   // silver
    {"usr_hana_008", 150.0},  // gold
    {"usr_june_010", 90.0},   // silver
};

struct BookCase {
  const char* user;
  const char* payment;
  const char* flight;
  const char* date;
  const char* origin;
  const char* dest;
  const char* first;
  const char* last;
};
constexpr BookCase kBookCases[] = {
    {"usr_ava_001", "cc_ava_1", "HAT001", "2024-05-18", "CLT", "MCO", "Ava", "Nguyen"},
    {"usr_hana_008", "cc_hana_1", "HAT003", "2024-05-16", "CLT", "JFK", "Hana", "Sato"},
    {"usr_cora_003", "cc_cora_1", "HAT006", "2024-05-17", "DFW", "ATL", "Cora", "Lindqvist"},
};

constexpr const char* kSetEmphases[] = {
    "payment edge cases",
    "multi-reservation coordination",
    "strict persona adherence",
    "time-sensitive changes",
    "membership-tier benefits",
};

double unit(uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

// Signed jitter in [-1, 1].
double jitter(uint64_t h) { return unit(h) * 2.0 - 1.0; }

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

uint64_t mix_key(uint64_t seed, std::string_view label, int set, int instance) {
  return hash_mix(hash_mix(seed, label),
                  static_cast<uint64_t>(set) * 1000003ull +
                      static_cast<uint64_t>(instance));
}

std::string pick(uint64_t h, std::initializer_list<const char*> options) {
  return *(options.begin() + h % options.size());
}

}  // namespace

MockBackend::MockBackend(env::Domain domain, uint64_t seed, MockTuning tuning)
    : domain_(std::move(domain)), seed_(seed), tuning_(tuning) {}

double MockBackend::infeasible_rate(int version) const {
  return std::max(tuning_.infeasible_base - tuning_.infeasible_step * (version - 1),
                  tuning_.infeasible_floor);
}

double MockBackend::badcall_rate(int version) const {
  return std::max(tuning_.badcall_base - tuning_.badcall_step * (version - 1),
                  tuning_.badcall_floor);
}

BackendRequest MockBackend::last_request() const {
  std::lock_guard<std::mutex> lock(mu_);
  return last_;
}

std::string MockBackend::complete(const BackendRequest& request) {
  {
    std::lock_guard<std::mutex> lock(mu_);
    last_ = request;
  }
  const json& meta = request.metadata;
  switch (request.worker) {
    case Worker::planner:
      return canonical(plan_reply());
    case Worker::prompt_engineer:
      return canonical(prompt_engineer_reply(meta));
    case Worker::judge:
      return canonical(judge_reply(meta));
    case Worker::random_pool:
      return canonical(scenario_reply(meta));
    case Worker::user_intent:
      return canonical(task_reply(meta));
    case Worker::user_simulator:
      return user_turn_reply(meta);
    case Worker::trajectory:
      return agent_turn_reply(meta);
    case Worker::modify:
      return canonical(modify_reply(meta));
    case Worker::task_validation:
    case Worker::trajectory_validation:
    case Worker::validation_function:
      // These stages are grounded in environment executions; any text a
      // backend produces for them is advisory at best.
      return canonical(json{{"ack", worker_name(request.worker)}});
  }
  throw BackendError("mock backend: unhandled worker");
}

json MockBackend::plan_reply() const { return WorkflowPlan::canonical().to_json(); }

json MockBackend::prompt_engineer_reply(const json& meta) const {
  const std::string mode = meta.value("mode", "init");
  json prompts = json::object();
  if (mode == "init") {
    const int k = meta.value("k", 0);
    for (const auto& [worker, text] : default_prompt_map()) {
      prompts[worker] = text;
    }
    if (k > 0) {
      const std::string emphasis = kSetEmphases[k % 5];
      const int seen = meta.contains("summaries")
                           ? static_cast<int>(meta["summaries"].size())
                           : 0;
      const std::string line = "\nSet " + std::to_string(k) + " emphasis: " +
                               emphasis + " (diversified against " +
                               std::to_string(seen) + " earlier sets).";
      prompts["random_pool"] = prompts["random_pool"].get<std::string>() + line;
      prompts["user_intent"] = prompts["user_intent"].get<std::string>() + line;
    }
    return json{{"prompts", prompts}};
  }
  if (mode != "evolve") throw BackendError("mock backend: unknown prompt mode " + mode);

  prompts = meta.at("prompts");
  const int new_version = meta.value("new_version", 0);
  std::vector<std::string> task_side, dialog_side;
  for (const auto& c : meta.at("categories")) {
    const std::string cat = c.get<std::string>();
    if (cat == "missing_resource" || cat == "contradictory_constraints" ||
        cat == "policy_violation" || cat == "infeasible") {
      task_side.push_back(cat);
    } else {
      dialog_side.push_back(cat);
    }
  }
  auto append = [&](const char* worker, const std::vector<std::string>& cats) {
    std::string line = "\n[v" + std::to_string(new_version) + " constraint] Avoid: ";
    for (size_t i = 0; i < cats.size(); ++i) {
      if (i) line += ", ";
      line += cats[i];
    }
    line += ".";
    prompts[worker] = prompts[worker].get<std::string>() + line;
  };
  if (!task_side.empty()) append("user_intent", task_side);
  if (!dialog_side.empty()) append("trajectory", dialog_side);
  if (task_side.empty() && dialog_side.empty()) {
    prompts["user_simulator"] =
        prompts["user_simulator"].get<std::string>() + "\n[v" +
        std::to_string(new_version) + " note] Keep personas crisp.";
  }
  return json{{"prompts", prompts}};
}

json MockBackend::judge_reply(const json& meta) const {
  const int set = meta.value("set", 0);
  const int instance = meta.value("instance", 0);
  const int version = meta.value("version", 1);
  const bool infeasible = meta.value("infeasible_initially", false);
  const int repairs = meta.value("repair_count", 0);
  const std::string artifact = meta.value("artifact", "artifact");

  const uint64_t base = mix_key(seed_, "judge", set, instance);
  auto jit = [&](uint64_t label) { return jitter(hash_mix(base, label)); };

  json out;
  out["executability"] = clamp01(1.0 - infeasible_rate(version) -
                                 (infeasible ? 0.10 : 0.0) + 0.02 * jit(1));
  out["tool_correctness"] =
      clamp01(1.0 - badcall_rate(version) - 0.05 * repairs + 0.02 * jit(2));
  out["trajectory_coherence"] =
      clamp01(std::min(0.62 + 0.09 * (version - 1), 0.97) + 0.02 * jit(3));
  out["difficulty_coverage"] =
      clamp01(std::min(0.55 + 0.05 * (version - 1), 0.85) + 0.02 * jit(4));
  json findings = json::array();
  if (meta.contains("categories")) {
    for (const auto& c : meta["categories"]) {
      findings.push_back(json{{"category", c},
                              {"description", "draft exhibited " + c.get<std::string>()},
                              {"evidence", artifact + " audit trail"}});
    }
  }
  out["findings"] = findings;
  return out;
}

json MockBackend::scenario_reply(const json& meta) const {
  const int set = meta.value("set", 0);
  const int instance = meta.value("instance", 0);
  const uint64_t h = mix_key(seed_, "scenario", set, instance);
  const std::string archetype = kArchetypes[h % 4];

  json out;
  out["archetype"] = archetype;
  out["user_profile"] = pick(hash_mix(h, 1), {"frequent flyer", "first-time caller",
                                              "family organizer", "business traveler"});
  out["testing_objective"] =
      pick(hash_mix(h, 2), {"policy boundary probing", "happy path completion",
                            "recovery from stale information"});
  out["operational_complexity"] =
      pick(hash_mix(h, 3), {"single reservation", "single tool chain"});
  out["behavioral_pattern"] =
      pick(hash_mix(h, 4), {"cooperative", "terse", "detail oriented"});
  if (archetype == std::string("cancel")) {
    out["policy_focuses"] = json::array({"cancel_already_flown", "cancellation_window"});
  } else if (archetype == std::string("baggage")) {
    out["policy_focuses"] = json::array({"baggage_add_only"});
  } else if (archetype == std::string("compensation")) {
    out["policy_focuses"] = json::array({"compensation_membership"});
  } else {
    out["policy_focuses"] =
        json::array({"passenger_max_five", "certificate_limit", "gift_card_limit"});
  }
  return out;
}

json MockBackend::build_task(int set, int instance, int version, bool force_valid) const {
  const uint64_t h = mix_key(seed_, "scenario", set, instance);
  const std::string archetype = kArchetypes[h % 4];
  const uint64_t case_h = hash_mix(h, 7);

  bool infeasible = false;
  int poison = 0;
  if (!force_valid) {
    const uint64_t inf_h =
        hash_mix(mix_key(seed_, "intent-infeasible", set, instance),
                 static_cast<uint64_t>(version));
    infeasible = unit(inf_h) < infeasible_rate(version);
    poison = static_cast<int>(hash_mix(inf_h, 11) % 3);
  }

  json task;
  task["id"] = "task-s" + std::to_string(set) + "-i" + std::to_string(instance);
  task["domain"] = domain_.name();
  task["context"] = "Airline customer service desk; the agent works the booking tools.";
  task["task_instructions"] =
      "Verify the account, complete the request within policy, then wrap up.";
  task["rubrics"] = "The request is completed with policy-compliant tool calls only.";
  task["initial_state_seed"] = 0;

  json params;
  params["archetype"] = archetype;
  json args = json::object();
  std::string user_id, purpose, reason, known, mutator;
  json focuses;

  if (archetype == "cancel") {
    const auto& c = kCancelCases[case_h % std::size(kCancelCases)];
    user_id = c.user;
    std::string res = c.res;
    mutator = "cancel_reservation";
    focuses = json::array({"cancel_already_flown", "cancellation_window"});
    if (infeasible && poison == 0) res = "RES999";
    if (infeasible && poison == 1) {
      user_id = "usr_femi_006";
      res = "RES009";  // already flown
    }
    if (infeasible && poison == 2) res = "RES005";  // someone else's booking
    purpose = "Cancel reservation " + res + " end to end.";
    reason = "I need to cancel my reservation " + res + ".";
    known = "user id " + user_id + "; reservation " + res;
    params["user_id"] = user_id;
    params["reservation_id"] = res;
    args["get_user_details"] = json{{"user_id", user_id}};
    args["get_reservation_details"] = json{{"reservation_id", res}};
    args["cancel_reservation"] = json{{"reservation_id", res}};
  } else if (archetype == "baggage") {
    const auto& c = kBaggageCases[case_h % std::size(kBaggageCases)];
    user_id = c.user;
    std::string res = c.res;
    int total = c.total, nonfree = c.nonfree;
    mutator = "update_reservation_baggage";
    focuses = json::array({"baggage_add_only"});
    if (infeasible && poison == 0) res = "RES999";
    if (infeasible && poison == 1) {
      user_id = "usr_ivan_009";
      res = "RES013";
      total = 0;  // decrease: the add-only rule forbids it
      nonfree = 0;
    }
    if (infeasible && poison == 2) res = "RES005";
    purpose = "Add checked bags to reservation " + res + ".";
    reason = "I want to change the checked bags on reservation " + res + ".";
    known = "user id " + user_id + "; reservation " + res;
    params["user_id"] = user_id;
    params["reservation_id"] = res;
    args["get_user_details"] = json{{"user_id", user_id}};
    args["get_reservation_details"] = json{{"reservation_id", res}};
    args["update_reservation_baggage"] = json{
        {"reservation_id", res}, {"total_baggages", total}, {"nonfree_baggages", nonfree}};
  } else if (archetype == "compensation") {
    const auto& c = kCompCases[case_h % std::size(kCompCases)];
    user_id = c.user;
    std::string target = c.user;
    mutator = "send_compensation";
    focuses = json::array({"compensation_membership"});
    if (infeasible && poison == 0) {
      user_id = "usr_zara_999";
      target = user_id;
    }
    if (infeasible && poison == 1) {
      user_id = "usr_cora_003";  // regular tier, not eligible
      target = user_id;
    }
    if (infeasible && poison == 2) {
      target = user_id == std::string("usr_hana_008") ? "usr_ava_001" : "usr_hana_008";
    }
    purpose = "Send a service-recovery credit to the caller.";
    reason = "My flight was a mess and I was told I would get compensation.";
    known = "user id " + user_id;
    params["user_id"] = user_id;
    args["get_user_details"] = json{{"user_id", user_id}};
    args["send_compensation"] = json{{"user_id", target}, {"amount", c.amount}};
  } else {
    const auto& c = kBookCases[case_h % std::size(kBookCases)];
    user_id = c.user;
    std::string booker = c.user;
    std::string fid = c.flight;
    mutator = "book_reservation";
    focuses = json::array({"passenger_max_five", "certificate_limit", "gift_card_limit"});
    json passengers = json::array({json{{"first_name", c.first}, {"last_name", c.last}}});
    if (infeasible && poison == 0) fid = "HAT999";
    if (infeasible && poison == 1) {
      for (int i = 0; i < 5; ++i) {
        passengers.push_back(json{{"first_name", c.first}, {"last_name", c.last}});
      }
    }
    if (infeasible && poison == 2) {
      booker = user_id == std::string("usr_hana_008") ? "usr_ava_001" : "usr_hana_008";
    }
    double fare = 0.0;
    const json& flights = domain_.initial_entities()["flights"];
    if (flights.contains(fid) && flights[fid]["dates"].contains(c.date)) {
      fare = flights[fid]["dates"][c.date]["prices"]["economy"].get<double>();
    }
    fare *= static_cast<double>(passengers.size());
    purpose = "Book a direct " + std::string(c.origin) + " to " + c.dest + " flight.";
    reason = "I'd like to book a flight from " + std::string(c.origin) + " to " +
             c.dest + " on " + c.date + ".";
    known = "user id " + user_id + "; route " + c.origin + "-" + c.dest;
    params["user_id"] = user_id;
    params["flight_id"] = fid;
    args["get_user_details"] = json{{"user_id", user_id}};
    args["search_direct_flight"] =
        json{{"origin", c.origin}, {"destination", c.dest}, {"date", c.date}};
    args["book_reservation"] = json{{"user_id", booker},
                                    {"origin", c.origin},
                                    {"destination", c.dest},
                                    {"flight_type", "one_way"},
                                    {"cabin", "economy"},
                                    {"flights", json::array({json{{"flight_id", fid},
                                                                  {"date", c.date}}})},
                                    {"passengers", passengers},
                                    {"payment_methods",
                                     json::array({json{{"payment_id", c.payment},
                                                       {"amount", fare}}})},
                                    {"total_baggages", 1},
                                    {"nonfree_baggages", 0},
                                    {"insurance", "no"}};
  }

  task["purpose"] = purpose;
  task["reason_for_call"] = reason;
  task["known_info"] = known;
  task["must_have_functions"] = json::array({mutator});
  params["policy_focuses"] = focuses;
  params["tool_arguments"] = args;
  task["selected_parameters"] = params;
  return task;
}

json MockBackend::task_reply(const json& meta) const {
  return build_task(meta.value("set", 0), meta.value("instance", 0),
                    meta.value("version", 1), meta.value("force_valid", false));
}

std::string MockBackend::user_turn_reply(const json& meta) const {
  const int turn = meta.value("turn", 0);
  const json& task = meta.at("task");
  if (turn == 0) {
    const std::string text = task.value("reason_for_call", "I need help.") +
                             std::string(" For reference: ") +
                             task.value("known_info", "") + ".";
    return policy::render_action(env::Role::user, env::Message{text, env::ControlSignal::none},
                                 "open with the request and the account details");
  }
  return policy::render_action(
      env::Role::user, env::Message{"Thanks, that's everything.", env::ControlSignal::stop},
      "the request was handled; end the call");
}

bool MockBackend::drift_active(const json& meta) const {
  if (tuning_.drift_start < 0) return false;
  const std::string phase = meta.value("phase", "pilot");
  if (phase != "scale") {
    // Fresh pilot batches draft cleanly; only sticky drift also poisons the
    // re-pilots that scaling triggers.
    return meta.value("repilot", false) && tuning_.drift_sticky;
  }
  const int instance = meta.value("instance", 0);
  if (instance < tuning_.drift_start) return false;
  return tuning_.drift_sticky || instance < tuning_.drift_end;
}

std::string MockBackend::agent_turn_reply(const json& meta) const {
  const int set = meta.value("set", 0);
  const int instance = meta.value("instance", 0);
  const int version = meta.value("version", 1);
  const int turn = meta.value("turn", 0);
  const json& task = meta.at("task");
  const json& params = task.at("selected_parameters");
  const std::string archetype = params.value("archetype", "cancel");
  const json& args = params.at("tool_arguments");

  std::vector<std::string> plan;
  if (archetype == "cancel") {
    plan = {"get_user_details", "get_reservation_details", "cancel_reservation"};
  } else if (archetype == "baggage") {
    plan = {"get_user_details", "get_reservation_details", "update_reservation_baggage"};
  } else if (archetype == "compensation") {
    plan = {"get_user_details", "send_compensation"};
  } else {
    plan = {"get_user_details", "search_direct_flight", "book_reservation"};
  }

  const bool drifted = drift_active(meta);
  const uint64_t bad_h = hash_mix(mix_key(seed_, "badcall", set, instance),
                                  static_cast<uint64_t>(version));
  const double rate = drifted ? 0.90 : badcall_rate(version);
  const bool inject = unit(bad_h) < rate;
  const int inj_pos = static_cast<int>(hash_mix(bad_h, 3) % plan.size());

  if (inject && turn == inj_pos) {
    if (drifted) {
      return policy::render_action(env::Role::agent,
                                   env::ToolCall{"expedite_refund", json::object()},
                                   "fast-track this through the refund queue");
    }
    const std::string name = plan[inj_pos];
    if (hash_mix(bad_h, 5) % 2 == 0) {
      // Required arguments missing: the schema gate rejects the call.
      return policy::render_action(env::Role::agent, env::ToolCall{name, json::object()},
                                   "the details are probably on file already");
    }
    json bad = args.contains(name) ? args[name] : json::object();
    if (bad.contains("reservation_id")) bad["reservation_id"] = "RES999";
    else if (bad.contains("user_id")) bad["user_id"] = "usr_zara_999";
    else bad["date"] = "2031-01-01";
    return policy::render_action(env::Role::agent, env::ToolCall{name, bad},
                                 "going from memory on the identifiers");
  }

  int idx = turn;
  if (inject && turn > inj_pos) idx = turn - 1;
  if (idx < static_cast<int>(plan.size())) {
    const std::string name = plan[idx];
    const json call_args = args.contains(name) ? args[name] : json::object();
    return policy::render_action(env::Role::agent, env::ToolCall{name, call_args},
                                 "next step of the standard procedure for " + archetype);
  }
  return policy::render_action(
      env::Role::agent,
      env::Message{"All done — the " + archetype + " request went through. Anything else?",
                   env::ControlSignal::none},
      "confirm completion and offer further help");
}

json MockBackend::modify_reply(const json& meta) const {
  const std::string mode = meta.value("mode", "task");
  if (mode == "task") {
    return json{{"repair_mode", "TASK"},
                {"task", build_task(meta.value("set", 0), meta.value("instance", 0),
                                    meta.value("version", 1), true)}};
  }
  json drops = json::array();
  if (meta.contains("diagnostics") && meta["diagnostics"].contains("turns")) {
    drops = meta["diagnostics"]["turns"];
  }
  return json{{"repair_mode", "TRAJECTORY"}, {"drop_turns", drops}};
}

}  // namespace duet::synth

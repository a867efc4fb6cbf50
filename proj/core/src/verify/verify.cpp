#include "duet/verify/verify.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "duet/errors.hpp"

namespace duet::verify {

namespace {

bool is_numeric_segment(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : path) {
    if (c == '.') {
      parts.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  parts.push_back(current);
  return parts;
}

// The nearest non-index segment from the right; array positions carry no
// meaning of their own.
std::string trailing_key(const std::string& path) {
  auto parts = split_path(path);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (!is_numeric_segment(*it)) return *it;
  }
  return parts.back();
}

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool name_matches(const std::string& key, const std::string& word) {
  return key == word || has_suffix(key, "_" + word);
}

}  // namespace

FieldKind classify_field(const std::string& path, const CheckerSpec& spec) {
  const std::string key = trailing_key(path);
  auto translate = [](const std::string& v) {
    if (v == "skip") return FieldKind::skip;
    if (v == "semantic") return FieldKind::semantic;
    return FieldKind::exact;
  };
  if (auto it = spec.field_overrides.find(path); it != spec.field_overrides.end()) {
    return translate(it->second);
  }
  if (auto it = spec.field_overrides.find(key); it != spec.field_overrides.end()) {
    return translate(it->second);
  }
  if (has_suffix(key, "_at") || has_suffix(key, "_time") || name_matches(key, "timestamp") ||
      name_matches(key, "uuid") || name_matches(key, "token")) {
    return FieldKind::skip;
  }
  if (name_matches(key, "description") || name_matches(key, "message") ||
      name_matches(key, "note") || name_matches(key, "notes") ||
      name_matches(key, "content")) {
    return FieldKind::semantic;
  }
  return FieldKind::exact;
}

double fuzzy_text_match(std::string_view a, std::string_view b) {
  auto words = [](std::string_view text) {
    std::set<std::string> out;
    std::string current;
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      } else if (!current.empty()) {
        out.insert(current);
        current.clear();
      }
    }
    if (!current.empty()) out.insert(current);
    return out;
  };
  const auto wa = words(a);
  const auto wb = words(b);
  if (wa.empty() && wb.empty()) return 1.0;
  if (wa.empty() || wb.empty()) return 0.0;
  size_t common = 0;
  for (const auto& w : wa) common += wb.count(w);
  const size_t total = wa.size() + wb.size() - common;
  return static_cast<double>(common) / static_cast<double>(total);
}

json FieldCheck::to_json() const {
  return json{{"path", path},     {"kind", kind},     {"passed", passed},
              {"score", score},   {"expected", expected}, {"actual", actual}};
}

json FunctionCheck::to_json() const {
  return json{{"name", name}, {"matched", matched}, {"turn_index", turn_index},
              {"detail", detail}};
}

json PolicyCheck::to_json() const {
  return json{{"rule_id", rule_id}, {"passed", passed}, {"detail", detail}};
}

namespace {

std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

void note_leaf(CompareResult& out, const CheckerSpec& spec, const std::string& path,
               const char* kind, bool passed, double score, json expected, json actual) {
  ++out.counted;
  if (passed) {
    ++out.passed;
  } else {
    FieldCheck check;
    check.path = path;
    check.kind = kind;
    check.passed = false;
    check.score = score;
    check.expected = std::move(expected);
    check.actual = std::move(actual);
    out.checks.push_back(std::move(check));
  }
  (void)spec;
}

// Marks every non-skipped leaf of a one-sided subtree as failed: used when
// a key exists on only one side of the comparison.
void mark_subtree(CompareResult& out, const CheckerSpec& spec, const json& value,
                  const std::string& path, bool present_in_expected) {
  if (value.is_object()) {
    for (auto it = value.begin(); it != value.end(); ++it) {
      mark_subtree(out, spec, it.value(), join_path(path, it.key()), present_in_expected);
    }
    return;
  }
  if (value.is_array()) {
    for (size_t i = 0; i < value.size(); ++i) {
      mark_subtree(out, spec, value[i], join_path(path, std::to_string(i)),
                   present_in_expected);
    }
    return;
  }
  if (classify_field(path, spec) == FieldKind::skip) return;
  note_leaf(out, spec, path, "exact", false, 0.0,
            present_in_expected ? value : json(),
            present_in_expected ? json() : value);
}

void compare_walk(CompareResult& out, const CheckerSpec& spec, const json& expected,
                  const json& actual, const std::string& path) {
  if (expected.is_object() && actual.is_object()) {
    std::set<std::string> keys;
    for (auto it = expected.begin(); it != expected.end(); ++it) keys.insert(it.key());
    for (auto it = actual.begin(); it != actual.end(); ++it) keys.insert(it.key());
    for (const std::string& key : keys) {
      const std::string sub = join_path(path, key);
      const bool in_e = expected.contains(key);
      const bool in_a = actual.contains(key);
      if (in_e && in_a) {
        compare_walk(out, spec, expected[key], actual[key], sub);
      } else {
        mark_subtree(out, spec, in_e ? expected[key] : actual[key], sub, in_e);
      }
    }
    return;
  }
  if (expected.is_array() && actual.is_array()) {
    if (expected.size() != actual.size()) {
      note_leaf(out, spec, join_path(path, "length"), "structure", false, 0.0,
                expected.size(), actual.size());
    }
    const size_t n = std::min(expected.size(), actual.size());
    for (size_t i = 0; i < n; ++i) {
      compare_walk(out, spec, expected[i], actual[i], join_path(path, std::to_string(i)));
    }
    // Surplus elements on either side are one-sided subtrees.
    const json& longer = expected.size() > actual.size() ? expected : actual;
    for (size_t i = n; i < longer.size(); ++i) {
      mark_subtree(out, spec, longer[i], join_path(path, std::to_string(i)),
                   expected.size() > actual.size());
    }
    return;
  }
  if (expected.is_structured() || actual.is_structured()) {
    // Shape disagreement (object vs array vs scalar).
    note_leaf(out, spec, path, "structure", false, 0.0, expected, actual);
    return;
  }

  switch (classify_field(path, spec)) {
    case FieldKind::skip:
      return;
    case FieldKind::semantic:
      if (expected.is_string() && actual.is_string()) {
        const double score =
            fuzzy_text_match(expected.get<std::string>(), actual.get<std::string>());
        note_leaf(out, spec, path, "semantic", score >= spec.semantic_threshold, score,
                  expected, actual);
        return;
      }
      [[fallthrough]];
    case FieldKind::exact:
      note_leaf(out, spec, path, "exact", expected == actual, expected == actual ? 1.0 : 0.0,
                expected, actual);
      return;
  }
}

}  // namespace

CompareResult deep_compare(const json& expected, const json& actual,
                           const CheckerSpec& spec) {
  CompareResult out;
  compare_walk(out, spec, expected, actual, "");
  out.fraction = out.counted == 0
                     ? 1.0
                     : static_cast<double>(out.passed) / static_cast<double>(out.counted);
  return out;
}

namespace {

std::string fuzzy_text_of(const json& v) {
  return v.is_string() ? v.get<std::string>() : canonical(v);
}

bool call_satisfies(const KeyFunction& kf, const rollout::ReplayStep& step,
                    double threshold, std::string* why_not) {
  for (auto it = kf.critical_params.begin(); it != kf.critical_params.end(); ++it) {
    if (!step.call.arguments.contains(it.key()) ||
        step.call.arguments[it.key()] != it.value()) {
      *why_not = "critical parameter '" + it.key() + "' mismatch";
      return false;
    }
  }
  for (auto it = kf.semantic_params.begin(); it != kf.semantic_params.end(); ++it) {
    if (!step.call.arguments.contains(it.key())) {
      *why_not = "semantic parameter '" + it.key() + "' missing";
      return false;
    }
    const double score = fuzzy_text_match(fuzzy_text_of(it.value()),
                                          fuzzy_text_of(step.call.arguments[it.key()]));
    if (score < threshold) {
      *why_not = "semantic parameter '" + it.key() + "' too dissimilar";
      return false;
    }
  }
  return true;
}

}  // namespace

std::vector<FunctionCheck> match_key_functions(const std::vector<KeyFunction>& required,
                                               const std::vector<rollout::ReplayStep>& steps,
                                               double semantic_threshold) {
  std::vector<FunctionCheck> out;
  std::vector<bool> used(steps.size(), false);
  for (const KeyFunction& kf : required) {
    FunctionCheck check;
    check.name = kf.name;
    std::string last_reason = "no successful call of this tool";
    for (size_t s = 0; s < steps.size(); ++s) {
      if (used[s] || !steps[s].executed.ok() || steps[s].call.name != kf.name) continue;
      std::string why_not;
      if (call_satisfies(kf, steps[s], semantic_threshold, &why_not)) {
        used[s] = true;
        check.matched = true;
        check.turn_index = steps[s].turn_index;
        check.detail = "matched";
        break;
      }
      last_reason = why_not;
    }
    if (!check.matched) check.detail = last_reason;
    out.push_back(std::move(check));
  }
  return out;
}

namespace {

// The verifier's own clock arithmetic — intentionally not the
// environment's implementation, so the two can cross-check each other.
// Minutes since a fixed civil epoch; seconds are ignored (the rule
// granularity is hours).
int64_t iso_minutes(const std::string& iso) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (std::sscanf(iso.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &s) < 3) {
    return 0;
  }
  static const int cumulative[] = {0, 31, 59, 90, 120, 151, 181, 212, 243, 273, 304, 334};
  auto is_leap = [](int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  };
  int64_t days = 0;
  for (int year = 1970; year < y; ++year) days += is_leap(year) ? 366 : 365;
  days += cumulative[mo - 1] + (mo > 2 && is_leap(y) ? 1 : 0) + (d - 1);
  return (days * 24 + h) * 60 + mi;
}

bool booked_within_hours(const std::string& created_at, const std::string& now, int hours) {
  return iso_minutes(now) - iso_minutes(created_at) < static_cast<int64_t>(hours) * 60;
}

using Evaluator = std::function<void(const rollout::ReplayStep&, PolicyCheck&)>;

const json* find_entity(const json& entities, const char* table, const std::string& id) {
  if (!entities.contains(table)) return nullptr;
  const json& t = entities[table];
  auto it = t.find(id);
  return it == t.end() ? nullptr : &*it;
}

void fail(PolicyCheck& check, const rollout::ReplayStep& step, const std::string& what) {
  check.passed = false;
  check.detail = "turn " + std::to_string(step.turn_index) + ": " + what;
}

}  // namespace

std::vector<PolicyCheck> check_policies(const env::Domain& domain,
                                        const std::vector<std::string>& focuses,
                                        const std::vector<rollout::ReplayStep>& steps) {
  const std::string now = domain.now();

  auto for_cancels = [&](PolicyCheck& check, auto&& judge) {
    for (const rollout::ReplayStep& step : steps) {
      if (step.call.name != "cancel_reservation" || !step.executed.ok()) continue;
      const std::string rid = step.call.arguments.value("reservation_id", "");
      const json* res = find_entity(step.pre_call_entities, "reservations", rid);
      if (!res) continue;
      judge(step, *res, check);
      if (!check.passed) return;
    }
  };

  std::map<std::string, Evaluator> table;  // keyed by canonical rule id

  // Each evaluator re-derives one rule from the pre-call snapshot of a
  // successful call. They never consult the environment's rejection
  // machinery.
  auto flown_segment = [](const json& entities, const json& res) {
    for (const json& seg : res["flights"]) {
      const json* flight =
          find_entity(entities, "flights", seg["flight_id"].get<std::string>());
      if (flight && (*flight)["dates"].contains(seg["date"].get<std::string>()) &&
          (*flight)["dates"][seg["date"].get<std::string>()]["status"] == "landed") {
        return true;
      }
    }
    return false;
  };

  std::vector<PolicyCheck> out;
  for (const std::string& focus : focuses) {
    const std::string rule = domain.canonical_rule_id(focus);  // throws UnknownRule
    PolicyCheck check;
    check.rule_id = rule;
    check.passed = true;
    check.detail = "no successful call violated this rule";

    if (rule == "cancel_already_flown") {
      for_cancels(check, [&](const rollout::ReplayStep& step, const json& res,
                             PolicyCheck& c) {
        if (flown_segment(step.pre_call_entities, res)) {
          fail(c, step, "cancelled a reservation with an already-flown segment");
        }
      });
    } else if (rule == "cancellation_window") {
      for_cancels(check, [&](const rollout::ReplayStep& step, const json& res,
                             PolicyCheck& c) {
        const bool airline_cancelled = [&] {
          for (const json& seg : res["flights"]) {
            const json* flight =
                find_entity(step.pre_call_entities, "flights",
                            seg["flight_id"].get<std::string>());
            if (flight && (*flight)["dates"].contains(seg["date"].get<std::string>()) &&
                (*flight)["dates"][seg["date"].get<std::string>()]["status"] ==
                    "cancelled") {
              return true;
            }
          }
          return false;
        }();
        const bool eligible =
            booked_within_hours(res.value("created_at", ""), now, 24) ||
            res.value("cabin", "") == "business" || res.value("insurance", "") == "yes" ||
            airline_cancelled;
        if (!eligible) {
          fail(c, step, "cancelled outside the 24h window with no qualifying condition");
        }
      });
    } else if (rule == "basic_economy_mod") {
      for (const rollout::ReplayStep& step : steps) {
        if (step.call.name != "update_reservation_flights" || !step.executed.ok()) continue;
        const json* res = find_entity(step.pre_call_entities, "reservations",
                                      step.call.arguments.value("reservation_id", ""));
        if (res && (*res)["cabin"] == "basic_economy") {
          fail(check, step, "modified flights on a basic economy reservation");
          break;
        }
      }
    } else if (rule == "baggage_add_only") {
      for (const rollout::ReplayStep& step : steps) {
        if (step.call.name != "update_reservation_baggage" || !step.executed.ok()) continue;
        const json* res = find_entity(step.pre_call_entities, "reservations",
                                      step.call.arguments.value("reservation_id", ""));
        if (res && (step.call.arguments.value("total_baggages", 0) <
                        (*res)["total_baggages"].get<int>() ||
                    step.call.arguments.value("nonfree_baggages", 0) <
                        (*res)["nonfree_baggages"].get<int>())) {
          fail(check, step, "reduced a baggage count");
          break;
        }
      }
    } else if (rule == "passenger_max_five") {
      for (const rollout::ReplayStep& step : steps) {
        if (step.call.name != "book_reservation" || !step.executed.ok()) continue;
        if (step.call.arguments.value("passengers", json::array()).size() > 5) {
          fail(check, step, "booked more than five passengers");
          break;
        }
      }
    } else if (rule == "certificate_limit" || rule == "gift_card_limit") {
      const char* source = rule == "certificate_limit" ? "certificate" : "gift_card";
      const int limit = rule == "certificate_limit" ? 1 : 3;
      for (const rollout::ReplayStep& step : steps) {
        if (step.call.name != "book_reservation" || !step.executed.ok()) continue;
        const json* user = find_entity(step.pre_call_entities, "users",
                                       step.call.arguments.value("user_id", ""));
        if (!user) continue;
        int n = 0;
        for (const json& pm : step.call.arguments.value("payment_methods", json::array())) {
          const std::string pid = pm.value("payment_id", "");
          if ((*user)["payment_methods"].contains(pid) &&
              (*user)["payment_methods"][pid]["source"] == source) {
            ++n;
          }
        }
        if (n > limit) {
          fail(check, step, std::string("booking used too many ") + source + " payments");
          break;
        }
      }
    } else if (rule == "compensation_membership") {
      for (const rollout::ReplayStep& step : steps) {
        if (step.call.name != "send_compensation" || !step.executed.ok()) continue;
        const json* user = find_entity(step.pre_call_entities, "users",
                                       step.call.arguments.value("user_id", ""));
        if (user && (*user)["membership"] != "silver" && (*user)["membership"] != "gold") {
          fail(check, step, "compensated a regular-tier member");
          break;
        }
      }
    } else {
      // A rule the domain knows but the verifier has no evaluator for
      // would silently verify nothing; refuse instead.
      throw UnknownRule("no verifier evaluator for rule: " + rule);
    }
    out.push_back(std::move(check));
  }
  return out;
}

json VerificationReport::to_json() const {
  json state = json::array();
  for (const auto& c : state_checks) state.push_back(c.to_json());
  json functions = json::array();
  for (const auto& c : function_checks) functions.push_back(c.to_json());
  json policy = json::array();
  for (const auto& c : policy_checks) policy.push_back(c.to_json());
  return json{{"overall_pass", overall_pass},
              {"reward", reward},
              {"replay_ok", replay_ok},
              {"failure", failure},
              {"component_scores",
               json{{"state", state_score},
                    {"functions", functions_score},
                    {"policy", policy_score}}},
              {"checks_state", std::move(state)},
              {"checks_functions", std::move(functions)},
              {"checks_policy", std::move(policy)}};
}

VerificationReport evaluate_submission(const env::Environment& environment,
                                       const env::TaskSpec& task,
                                       const rollout::Trajectory& trajectory) {
  const CheckerSpec& spec = task.checker();
  VerificationReport report;

  rollout::Replay replay;
  try {
    replay = replay_trajectory(environment, task, trajectory);
    report.replay_ok = true;
  } catch (const ProtocolViolation& e) {
    report.failure = std::string("replay failed: ") + e.what();
    return report;  // all scores stay 0; the record cannot have happened
  }

  CompareResult state = deep_compare(spec.reference_final_state["entities"],
                                     replay.final_state.entities, spec);
  report.state_score = state.fraction;
  report.state_checks = std::move(state.checks);

  report.function_checks =
      match_key_functions(spec.key_functions, replay.tool_steps, spec.semantic_threshold);
  if (spec.key_functions.empty()) {
    report.functions_score = 1.0;
  } else {
    int matched = 0;
    for (const auto& c : report.function_checks) matched += c.matched;
    report.functions_score =
        static_cast<double>(matched) / static_cast<double>(spec.key_functions.size());
  }

  report.policy_checks =
      check_policies(environment.domain(), spec.policy_focuses, replay.tool_steps);
  if (report.policy_checks.empty()) {
    report.policy_score = 1.0;
  } else {
    int passed = 0;
    for (const auto& c : report.policy_checks) passed += c.passed;
    report.policy_score =
        static_cast<double>(passed) / static_cast<double>(report.policy_checks.size());
  }

  report.overall_pass = report.state_score == 1.0 && report.functions_score == 1.0 &&
                        report.policy_score == 1.0;
  report.reward = report.overall_pass ? 1.0 : 0.0;
  return report;
}

rollout::RewardFn make_scorer(const env::Environment& environment, const env::TaskSpec& task) {
  return [&environment, &task](const rollout::Trajectory& trajectory) {
    return evaluate_submission(environment, task, trajectory).reward;
  };
}

}  // namespace duet::verify

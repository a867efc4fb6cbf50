#include <doctest.h>

#include <set>

#include "duet/env/env.hpp"
#include "duet/errors.hpp"

using namespace duet;
using namespace duet::env;

namespace {

ToolCall call(const char* name, json args) {
  return ToolCall{name, std::move(args)};
}

EnvState fresh_state(const Environment& e) { return e.reset_seed(0); }

}  // namespace

TEST_CASE("airline fixture loads with the expected shape") {
  Domain d = Domain::builtin_airline();
  CHECK(d.name() == "airline");
  CHECK(d.tools().size() == 10);
  CHECK(d.policy_rules().size() == 8);
  CHECK(d.initial_entities()["users"].size() == 10);
  CHECK(d.initial_entities()["flights"].size() == 20);
  CHECK(d.initial_entities()["reservations"].size() == 15);
  CHECK(d.tool("get_flight_status").allowed == ToolRole::both);
  CHECK(d.tool("get_user_details").read_only);
  CHECK_FALSE(d.tool("book_reservation").read_only);
}

TEST_CASE("toy fixture is a five-tool domain") {
  Domain d = Domain::builtin_toy();
  CHECK(d.tools().size() == 5);
  CHECK(d.policy_rules().size() == 8);
  CHECK(d.initial_entities()["reservations"].size() == 3);
}

TEST_CASE("rule id lookup accepts historical aliases") {
  Domain d = Domain::builtin_airline();
  CHECK(d.canonical_rule_id("passenger_max_five") == "passenger_max_five");
  CHECK(d.canonical_rule_id("passenger_max_5") == "passenger_max_five");
  CHECK(d.canonical_rule_id("basic_economy_modification_prohibition") ==
        "basic_economy_mod");
  CHECK(d.canonical_rule_id("cancellation_24h_rule") == "cancellation_window");
  CHECK_THROWS_AS((void)d.canonical_rule_id("no_such_rule"), UnknownRule);
  CHECK(d.has_rule("baggage_addition_only"));
  CHECK_FALSE(d.has_rule("frequent_flyer_boost"));
}

TEST_CASE("argument validation enforces the declared schema") {
  Domain d = Domain::builtin_airline();
  const ToolSchema& t = d.tool("get_flight_status");
  CHECK_THROWS_AS(validate_args(t, json{{"flight_id", "HAT001"}}), SchemaViolation);
  CHECK_THROWS_AS(validate_args(t, json{{"flight_id", 7}, {"date", "2024-05-16"}}),
                  SchemaViolation);
  CHECK_THROWS_AS(
      validate_args(t, json{{"flight_id", "HAT001"}, {"date", "2024-05-16"}, {"extra", 1}}),
      SchemaViolation);
  CHECK_NOTHROW(validate_args(t, json{{"flight_id", "HAT001"}, {"date", "2024-05-16"}}));
}

TEST_CASE("reset is deterministic and starts with the user holding the floor") {
  Environment e(Domain::builtin_toy());
  TaskSpec task = builtin_toy_cancel_task();
  EnvState a = e.reset(task);
  EnvState b = e.reset(task);
  CHECK(a.serialize() == b.serialize());
  CHECK(a.turn() == 0);
  CHECK(a.next_speaker() == Role::user);
  CHECK_FALSE(a.terminated());
  CHECK(a.history().empty());

  EnvState round_trip = EnvState::from_json(json::parse(a.serialize()));
  CHECK(round_trip.serialize() == a.serialize());
}

TEST_CASE("read-only tools leave the state byte-identical") {
  Environment e(Environment(Domain::builtin_airline()).domain());
  EnvState s = fresh_state(e);
  const std::string before = s.serialize();

  auto [s1, r1] = e.execute_tool(s, Role::agent,
                                 call("get_user_details", {{"user_id", "usr_ava_001"}}));
  CHECK(r1.ok());
  CHECK(r1.payload["membership"] == "gold");
  CHECK(s1.serialize() == before);

  auto [s2, r2] = e.execute_tool(
      s, Role::agent,
      call("search_direct_flight",
           {{"origin", "CLT"}, {"destination", "MCO"}, {"date", "2024-05-16"}}));
  CHECK(r2.ok());
  CHECK(r2.payload["flights"].size() == 1);
  CHECK(r2.payload["flights"][0]["flight_id"] == "HAT001");
  CHECK(s2.serialize() == before);

  // Reads of missing entities are business errors, not crashes, and still
  // leave the state untouched.
  auto [s3, r3] = e.execute_tool(s, Role::agent,
                                 call("get_reservation_details", {{"reservation_id", "RES999"}}));
  CHECK(r3.status == "error");
  CHECK(s3.serialize() == before);
}

TEST_CASE("one-stop search composes connecting segments") {
  Environment e(Domain::builtin_airline());
  EnvState s = fresh_state(e);
  auto [s1, r] = e.execute_tool(
      s, Role::agent,
      call("search_onestop_flight",
           {{"origin", "CLT"}, {"destination", "SEA"}, {"date", "2024-05-16"}}));
  CHECK(r.ok());
  bool found = false;
  for (const json& pair : r.payload["itineraries"]) {
    if (pair[0]["flight_id"] == "HAT008" && pair[1]["flight_id"] == "HAT009") found = true;
  }
  CHECK(found);
}

TEST_CASE("tool access control") {
  Environment e(Domain::builtin_airline());
  EnvState s = fresh_state(e);
  CHECK_THROWS_AS(
      e.execute_tool(s, Role::user, call("get_user_details", {{"user_id", "usr_ava_001"}})),
      PermissionDenied);
  CHECK_THROWS_AS(e.execute_tool(s, Role::agent, call("warp_drive", json::object())),
                  UnknownTool);
  // Dual control: the user may query flight status directly.
  auto [s1, r] = e.execute_tool(
      s, Role::user, call("get_flight_status", {{"flight_id", "HAT005"}, {"date", "2024-05-17"}}));
  CHECK(r.ok());
  CHECK(r.payload["status"] == "cancelled");
}

TEST_CASE("booking enforces payment and passenger rules") {
  Environment e(Domain::builtin_airline());
  EnvState s = fresh_state(e);

  json base{{"user_id", "usr_ava_001"},
            {"origin", "CLT"},
            {"destination", "MCO"},
            {"flight_type", "one_way"},
            {"cabin", "economy"},
            {"flights", json::array({{{"flight_id", "HAT001"}, {"date", "2024-05-16"}}})},
            {"passengers", json::array({{{"first_name", "Ava"}, {"last_name", "Nguyen"}}})},
            {"payment_methods", json::array({{{"payment_id", "cc_ava_1"}, {"amount", 139}}})},
            {"total_baggages", 1},
            {"nonfree_baggages", 0},
            {"insurance", "no"}};

  SUBCASE("six passengers is one too many") {
    json args = base;
    args["passengers"] = json::array();
    for (int i = 0; i < 6; ++i) {
      args["passengers"].push_back({{"first_name", "P" + std::to_string(i)}, {"last_name", "X"}});
    }
    try {
      e.execute_tool(s, Role::agent, call("book_reservation", args));
      FAIL("expected PolicyRejection");
    } catch (const PolicyRejection& rej) {
      CHECK(rej.rule_id() == "passenger_max_five");
    }
  }

  SUBCASE("five passengers is allowed when seats suffice") {
    json args = base;
    args["passengers"] = json::array();
    for (int i = 0; i < 5; ++i) {
      args["passengers"].push_back({{"first_name", "P" + std::to_string(i)}, {"last_name", "X"}});
    }
    auto [s1, r] = e.execute_tool(s, Role::agent, call("book_reservation", args));
    CHECK(r.ok());
  }

  SUBCASE("two certificates are rejected") {
    json args = base;
    args["user_id"] = "usr_cora_003";
    args["payment_methods"] =
        json::array({{{"payment_id", "cert_cora_1"}, {"amount", 100}},
                     {{"payment_id", "cert_cora_2"}, {"amount", 39}}});
    try {
      e.execute_tool(s, Role::agent, call("book_reservation", args));
      FAIL("expected PolicyRejection");
    } catch (const PolicyRejection& rej) {
      CHECK(rej.rule_id() == "certificate_limit");
    }
  }

  SUBCASE("four gift cards are rejected") {
    json args = base;
    args["user_id"] = "usr_ben_002";
    args["payment_methods"] =
        json::array({{{"payment_id", "gc_ben_1"}, {"amount", 40}},
                     {{"payment_id", "gc_ben_2"}, {"amount", 30}},
                     {{"payment_id", "gc_ben_3"}, {"amount", 25}},
                     {{"payment_id", "gc_ben_4"}, {"amount", 20}}});
    try {
      e.execute_tool(s, Role::agent, call("book_reservation", args));
      FAIL("expected PolicyRejection");
    } catch (const PolicyRejection& rej) {
      CHECK(rej.rule_id() == "gift_card_limit");
    }
  }

  SUBCASE("payment method must belong to the user") {
    json args = base;
    args["payment_methods"] = json::array({{{"payment_id", "cc_ben_1"}, {"amount", 139}}});
    auto [s1, r] = e.execute_tool(s, Role::agent, call("book_reservation", args));
    CHECK(r.status == "error");
  }

  SUBCASE("successful booking allocates the next id deterministically") {
    auto [s1, r] = e.execute_tool(s, Role::agent, call("book_reservation", base));
    REQUIRE(r.ok());
    CHECK(r.payload["reservation_id"] == "RES016");
    CHECK(r.payload["created_at"] == "2024-05-15T12:00:00");
    CHECK(s1.entities["reservations"].contains("RES016"));
    json ids = s1.entities["users"]["usr_ava_001"]["reservation_ids"];
    CHECK(ids.back() == "RES016");
    // Same call on the same state gives the same bytes.
    auto [s2, r2] = e.execute_tool(s, Role::agent, call("book_reservation", base));
    CHECK(s1.serialize() == s2.serialize());
  }
}

TEST_CASE("cancellation policy") {
  Environment e(Domain::builtin_airline());
  EnvState s = fresh_state(e);

  auto cancel = [&](const char* rid) {
    return e.execute_tool(s, Role::agent, call("cancel_reservation", {{"reservation_id", rid}}));
  };

  SUBCASE("old uninsured economy booking cannot be cancelled") {
    try {
      cancel("RES001");
      FAIL("expected PolicyRejection");
    } catch (const PolicyRejection& rej) {
      CHECK(rej.rule_id() == "cancellation_window");
    }
  }

  SUBCASE("already-flown segment blocks cancellation") {
    try {
      cancel("RES009");
      FAIL("expected PolicyRejection");
    } catch (const PolicyRejection& rej) {
      CHECK(rej.rule_id() == "cancel_already_flown");
    }
  }

  SUBCASE("insurance, recency, airline cancellation and business all qualify") {
    for (const char* rid : {"RES003", "RES004", "RES013", "RES002"}) {
      auto [s1, r] = cancel(rid);
      CHECK(r.ok());
      CHECK(s1.entities["reservations"][rid]["status"] == "cancelled");
    }
  }

  SUBCASE("cancelling twice is a business error") {
    auto [s1, r1] = cancel("RES003");
    REQUIRE(r1.ok());
    auto [s2, r2] = e.execute_tool(
        s1, Role::agent, call("cancel_reservation", {{"reservation_id", "RES003"}}));
    CHECK(r2.status == "error");
    CHECK(s2.serialize() == s1.serialize());
  }
}

TEST_CASE("flight changes respect the basic economy rule and the route") {
  Environment e(Domain::builtin_airline());
  EnvState s = fresh_state(e);

  SUBCASE("basic economy cannot be modified") {
    try {
      e.execute_tool(s, Role::agent,
                     call("update_reservation_flights",
                          {{"reservation_id", "RES006"},
                           {"cabin", "economy"},
                           {"flights", json::array({{{"flight_id", "HAT007"}, {"date", "2024-05-18"}}})}}));
      FAIL("expected PolicyRejection");
    } catch (const PolicyRejection& rej) {
      CHECK(rej.rule_id() == "basic_economy_mod");
    }
  }

  SUBCASE("moving to another date reprices the segment") {
    auto [s1, r] = e.execute_tool(
        s, Role::agent,
        call("update_reservation_flights",
             {{"reservation_id", "RES001"},
              {"cabin", "economy"},
              {"flights", json::array({{{"flight_id", "HAT001"}, {"date", "2024-05-18"}}})}}));
    REQUIRE(r.ok());
    CHECK(s1.entities["reservations"]["RES001"]["flights"][0]["price"] == 132);
  }

  SUBCASE("segments must keep the reservation route") {
    auto [s1, r] = e.execute_tool(
        s, Role::agent,
        call("update_reservation_flights",
             {{"reservation_id", "RES001"},
              {"cabin", "economy"},
              {"flights", json::array({{{"flight_id", "HAT003"}, {"date", "2024-05-18"}}})}}));
    CHECK(r.status == "error");
  }
}

TEST_CASE("baggage can be added but never removed") {
  Environment e(Domain::builtin_airline());
  EnvState s = fresh_state(e);

  try {
    e.execute_tool(s, Role::agent,
                   call("update_reservation_baggage",
                        {{"reservation_id", "RES014"}, {"total_baggages", 1}, {"nonfree_baggages", 1}}));
    FAIL("expected PolicyRejection");
  } catch (const PolicyRejection& rej) {
    CHECK(rej.rule_id() == "baggage_add_only");
  }

  auto [s1, r] = e.execute_tool(
      s, Role::agent,
      call("update_reservation_baggage",
           {{"reservation_id", "RES014"}, {"total_baggages", 3}, {"nonfree_baggages", 2}}));
  REQUIRE(r.ok());
  CHECK(r.payload["previous_total_baggages"] == 2);
  CHECK(r.payload["reservation"]["total_baggages"] == 3);
}

TEST_CASE("compensation is members-only and ids are stable") {
  Environment e(Domain::builtin_airline());
  EnvState s = fresh_state(e);

  try {
    e.execute_tool(s, Role::agent,
                   call("send_compensation", {{"user_id", "usr_cora_003"}, {"amount", 100}}));
    FAIL("expected PolicyRejection");
  } catch (const PolicyRejection& rej) {
    CHECK(rej.rule_id() == "compensation_membership");
  }

  auto [s1, r1] = e.execute_tool(
      s, Role::agent, call("send_compensation", {{"user_id", "usr_ben_002"}, {"amount", 100}}));
  REQUIRE(r1.ok());
  CHECK(r1.payload["certificate_id"] == "comp_cert_usr_ben_002_1");
  auto [s2, r2] = e.execute_tool(
      s1, Role::agent, call("send_compensation", {{"user_id", "usr_ben_002"}, {"amount", 50}}));
  REQUIRE(r2.ok());
  CHECK(r2.payload["certificate_id"] == "comp_cert_usr_ben_002_2");
  CHECK(s2.entities["users"]["usr_ben_002"]["payment_methods"].contains("comp_cert_usr_ben_002_2"));
}

TEST_CASE("every policy rule in the table has a trigger and a pass") {
  Environment e(Domain::builtin_airline());
  EnvState s = fresh_state(e);
  std::set<std::string> triggered;

  auto expect_reject = [&](const char* tool, json args) {
    try {
      e.execute_tool(s, Role::agent, call(tool, std::move(args)));
      FAIL("expected PolicyRejection from ", tool);
    } catch (const PolicyRejection& rej) {
      triggered.insert(rej.rule_id());
    }
  };

  json book{{"user_id", "usr_ava_001"},
            {"origin", "CLT"},
            {"destination", "MCO"},
            {"flight_type", "one_way"},
            {"cabin", "economy"},
            {"flights", json::array({{{"flight_id", "HAT001"}, {"date", "2024-05-16"}}})},
            {"passengers", json::array({{{"first_name", "Ava"}, {"last_name", "Nguyen"}}})},
            {"payment_methods", json::array({{{"payment_id", "cc_ava_1"}, {"amount", 139}}})},
            {"total_baggages", 0},
            {"nonfree_baggages", 0},
            {"insurance", "no"}};

  json too_many = book;
  too_many["passengers"] = json::array();
  for (int i = 0; i < 6; ++i) {
    too_many["passengers"].push_back({{"first_name", "P" + std::to_string(i)}, {"last_name", "X"}});
  }
  expect_reject("book_reservation", too_many);

  json two_certs = book;
  two_certs["user_id"] = "usr_cora_003";
  two_certs["payment_methods"] = json::array({{{"payment_id", "cert_cora_1"}, {"amount", 1}},
                                              {{"payment_id", "cert_cora_2"}, {"amount", 1}}});
  expect_reject("book_reservation", two_certs);

  json four_cards = book;
  four_cards["user_id"] = "usr_ben_002";
  four_cards["payment_methods"] = json::array({{{"payment_id", "gc_ben_1"}, {"amount", 1}},
                                               {{"payment_id", "gc_ben_2"}, {"amount", 1}},
                                               {{"payment_id", "gc_ben_3"}, {"amount", 1}},
                                               {{"payment_id", "gc_ben_4"}, {"amount", 1}}});
  expect_reject("book_reservation", four_cards);

  expect_reject("cancel_reservation", {{"reservation_id", "RES001"}});
  expect_reject("cancel_reservation", {{"reservation_id", "RES009"}});
  expect_reject("update_reservation_flights",
                {{"reservation_id", "RES006"},
                 {"cabin", "economy"},
                 {"flights", json::array({{{"flight_id", "HAT007"}, {"date", "2024-05-18"}}})}});
  expect_reject("update_reservation_baggage",
                {{"reservation_id", "RES014"}, {"total_baggages", 0}, {"nonfree_baggages", 0}});
  expect_reject("send_compensation", {{"user_id", "usr_dev_004"}, {"amount", 100}});

  std::set<std::string> table;
  for (const auto& rule : e.domain().policy_rules()) table.insert(rule.id);
  CHECK(triggered == table);

  // And each rule also has a passing counterpart on the same fixture.
  CHECK(e.execute_tool(s, Role::agent, call("book_reservation", book)).second.ok());
  CHECK(e.execute_tool(s, Role::agent, call("cancel_reservation", {{"reservation_id", "RES003"}}))
            .second.ok());
  CHECK(e.execute_tool(s, Role::agent,
                       call("update_reservation_flights",
                            {{"reservation_id", "RES001"},
                             {"cabin", "economy"},
                             {"flights", json::array({{{"flight_id", "HAT001"}, {"date", "2024-05-18"}}})}}))
            .second.ok());
  CHECK(e.execute_tool(s, Role::agent,
                       call("update_reservation_baggage",
                            {{"reservation_id", "RES014"}, {"total_baggages", 3}, {"nonfree_baggages", 1}}))
            .second.ok());
  CHECK(e.execute_tool(s, Role::agent,
                       call("send_compensation", {{"user_id", "usr_ava_001"}, {"amount", 50}}))
            .second.ok());
}

TEST_CASE("joint actions alternate messages and keep the floor on tool calls") {
  Environment e(Domain::builtin_toy());
  TaskSpec task = builtin_toy_cancel_task();
  EnvState s = e.reset(task);

  // Agent cannot open: the user holds the floor.
  CHECK_THROWS_AS(e.apply(s, JointAction::by(Role::agent, Message{"hello"})),
                  ProtocolViolation);
  CHECK_THROWS_AS(e.apply(s, JointAction{Message{"a"}, Message{"b"}}), ProtocolViolation);
  CHECK_THROWS_AS(e.apply(s, JointAction{}), ProtocolViolation);

  StepResult r1 = e.apply(s, JointAction::by(Role::user, Message{"Hi, cancel RES301 please."}));
  CHECK(r1.state.turn() == 1);
  CHECK(r1.state.next_speaker() == Role::agent);
  CHECK_FALSE(r1.tool_result.has_value());

  // A tool call does not advance the turn and leaves the agent speaking.
  StepResult r2 = e.apply(r1.state,
                          JointAction::by(Role::agent, ToolCall{"cancel_reservation",
                                                                {{"reservation_id", "RES301"}}}));
  CHECK(r2.state.turn() == 1);
  CHECK(r2.state.next_speaker() == Role::agent);
  REQUIRE(r2.tool_result.has_value());
  CHECK(r2.tool_result->ok());
  CHECK(r2.state.history().size() == 3);  // message + call + result

  // A rejected call is recorded, state entities untouched, episode alive.
  StepResult r3 = e.apply(r2.state,
                          JointAction::by(Role::agent, ToolCall{"cancel_reservation",
                                                                {{"reservation_id", "RES302"}}}));
  REQUIRE(r3.tool_result.has_value());
  CHECK(r3.tool_result->status == "rejected");
  CHECK(r3.tool_result->payload["error_type"] == "policy_rejection");
  CHECK(r3.tool_result->payload["rule_id"] == "cancellation_window");
  CHECK(canonical(r3.state.entities) == canonical(r2.state.entities));
  CHECK_FALSE(r3.state.terminated());

  StepResult r4 = e.apply(r3.state, JointAction::by(Role::agent, Message{"Done, anything else?"}));
  CHECK(r4.state.next_speaker() == Role::user);

  StepResult r5 = e.apply(
      r4.state, JointAction::by(Role::user, Message{"Thanks!", ControlSignal::stop}));
  CHECK(r5.state.terminated());
  CHECK(r5.state.termination_reason() == "stop");
  CHECK_THROWS_AS(e.apply(r5.state, JointAction::by(Role::agent, Message{"bye"})),
                  ProtocolViolation);
}

TEST_CASE("observations are role-local") {
  Environment e(Domain::builtin_toy());
  TaskSpec task = builtin_toy_cancel_task();
  EnvState s = e.reset(task);

  s = e.apply(s, JointAction::by(Role::user, Message{"Hi, cancel RES301."})).state;
  s = e.apply(s, JointAction::by(Role::agent,
                                 ToolCall{"get_reservation_details", {{"reservation_id", "RES301"}}}))
          .state;
  s = e.apply(s, JointAction::by(Role::agent, Message{"Looking into it."})).state;

  Observation agent_obs = e.observe(s, Role::agent);
  Observation user_obs = e.observe(s, Role::user);

  CHECK(agent_obs.visible_history.size() == 4);  // msg + call + result + msg
  CHECK(user_obs.visible_history.size() == 2);   // the two messages only
  for (const json& ev : user_obs.visible_history) CHECK(ev["kind"] == "message");

  // The user's goal text is not shown to the agent.
  CHECK(agent_obs.task_context.find("RES301") == std::string::npos);
  CHECK(user_obs.task_context.find("RES301") != std::string::npos);

  // Tool menus are role-filtered: the toy domain gives the user nothing.
  CHECK(agent_obs.tool_schemas.size() == 5);
  CHECK(user_obs.tool_schemas.empty());

  // In the full domain the user can see the dual-control status tool.
  Environment airline(Domain::builtin_airline());
  Observation u = airline.observe(airline.reset_seed(0), Role::user);
  REQUIRE(u.tool_schemas.size() == 1);
  CHECK(u.tool_schemas[0]["name"] == "get_flight_status");
}

TEST_CASE("task files parse strictly") {
  TaskSpec t = builtin_toy_cancel_task();
  CHECK(t.id == "toy-cancel-001");
  CHECK(t.domain == "toy");
  REQUIRE(t.checker_spec.has_value());
  CHECK(t.checker().key_functions.size() == 1);
  CHECK(t.must_have_functions == std::vector<std::string>{"cancel_reservation"});
  CHECK(t.selected_parameters["tool_arguments"].contains("cancel_reservation"));

  json missing_id = t.to_json();
  missing_id.erase("id");
  CHECK_THROWS_AS((void)TaskSpec::from_json(missing_id), BadTask);

  // Round trip.
  TaskSpec again = TaskSpec::from_json(t.to_json());
  CHECK(again.to_json() == t.to_json());
}

#include "semantics.hpp"

#include <cctype>
#include <cstdio>
#include <string>

namespace duet::env::detail {

namespace {

ToolResult ok_result(const std::string& tool, json payload) {
  return ToolResult{tool, "ok", std::move(payload)};
}

ToolResult business_error(const std::string& tool, const std::string& msg) {
  return ToolResult{tool, "error", json{{"message", msg}}};
}

// Nested argument shapes (array elements) are not covered by the top-level
// schema check, so they are enforced here with the same error type.
std::string nested_string(const json& j, const char* key,
                          const std::string& where) {
  if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
    throw SchemaViolation(where + ": expected object with string '" + key + "'");
  }
  return j[key].get<std::string>();
}

json flight_summary(const json& flight, const std::string& date) {
  const json& day = flight["dates"][date];
  json out{{"flight_id", flight["flight_id"]},
           {"origin", flight["origin"]},
           {"destination", flight["destination"]},
           {"scheduled_departure_time_est", flight["scheduled_departure_time_est"]},
           {"date", date},
           {"status", day["status"]}};
  if (day.contains("prices")) out["prices"] = day["prices"];
  if (day.contains("available_seats")) out["available_seats"] = day["available_seats"];
  return out;
}

bool day_available(const json& flights, const std::string& fid,
                   const std::string& date) {
  if (!flights.contains(fid)) return false;
  const json& dates = flights[fid]["dates"];
  return dates.contains(date) && dates[date]["status"] == "available";
}

bool segment_has_status(const json& flights, const json& reservation,
                        const char* status) {
  for (const json& seg : reservation["flights"]) {
    const std::string fid = seg["flight_id"];
    const std::string date = seg["date"];
    if (flights.contains(fid) && flights[fid]["dates"].contains(date) &&
        flights[fid]["dates"][date]["status"] == status) {
      return true;
    }
  }
  return false;
}

bool cancel_eligible(const json& flights, const json& reservation,
                     const std::string& now) {
  if (within_hours(reservation["created_at"], now, 24)) return true;
  if (reservation["cabin"] == "business") return true;
  if (reservation["insurance"] == "yes") return true;
  return segment_has_status(flights, reservation, "cancelled");
}

std::string next_reservation_id(const json& reservations) {
  long best = 0;
  for (auto it = reservations.begin(); it != reservations.end(); ++it) {
    const std::string& key = it.key();
    if (key.rfind("RES", 0) != 0) continue;
    bool digits = key.size() > 3;
    for (size_t i = 3; i < key.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(key[i]))) digits = false;
    }
    if (digits) best = std::max(best, std::stol(key.substr(3)));
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "RES%03ld", best + 1);
  return buf;
}

ToolResult do_book(json& entities, const std::string& now, const json& a) {
  const std::string tool = "book_reservation";
  json& users = entities["users"];
  json& flights = entities["flights"];
  json& reservations = entities["reservations"];

  const std::string user_id = a["user_id"];
  if (!users.contains(user_id)) {
    return business_error(tool, "user not found: " + user_id);
  }
  json& user = users[user_id];

  const json& passengers = a["passengers"];
  if (passengers.empty()) return business_error(tool, "no passengers given");
  for (const json& p : passengers) {
    nested_string(p, "first_name", "passengers");
    nested_string(p, "last_name", "passengers");
  }
  if (passengers.size() > 5) {
    throw PolicyRejection("passenger_max_five",
                          "a reservation can hold at most five passengers");
  }

  const std::string cabin = a["cabin"];
  if (cabin != "basic_economy" && cabin != "economy" && cabin != "business") {
    return business_error(tool, "unknown cabin: " + cabin);
  }

  int certificates = 0, gift_cards = 0;
  for (const json& pm : a["payment_methods"]) {
    const std::string pid = nested_string(pm, "payment_id", "payment_methods");
    if (!user["payment_methods"].contains(pid)) {
      return business_error(tool, "payment method not on profile: " + pid);
    }
    const std::string source = user["payment_methods"][pid]["source"];
    certificates += source == "certificate";
    gift_cards += source == "gift_card";
  }
  if (certificates > 1) {
    throw PolicyRejection("certificate_limit",
                          "at most one certificate per booking");
  }
  if (gift_cards > 3) {
    throw PolicyRejection("gift_card_limit", "at most three gift cards per booking");
  }

  if (a["flights"].empty()) return business_error(tool, "no flight segments given");
  json segments = json::array();
  for (const json& seg : a["flights"]) {
    const std::string fid = nested_string(seg, "flight_id", "flights");
    const std::string date = nested_string(seg, "date", "flights");
    if (!day_available(flights, fid, date)) {
      return business_error(tool, "flight not available: " + fid + " on " + date);
    }
    const json& day = flights[fid]["dates"][date];
    if (!day["prices"].contains(cabin) ||
        day["available_seats"][cabin].get<long>() <
            static_cast<long>(passengers.size())) {
      return business_error(tool, "not enough " + cabin + " seats on " + fid);
    }
    segments.push_back(
        {{"flight_id", fid}, {"date", date}, {"price", day["prices"][cabin]}});
  }

  const std::string rid = next_reservation_id(reservations);
  json reservation{{"reservation_id", rid},
                   {"user_id", user_id},
                   {"origin", a["origin"]},
                   {"destination", a["destination"]},
                   {"flight_type", a["flight_type"]},
                   {"cabin", cabin},
                   {"flights", segments},
                   {"passengers", passengers},
                   {"payment_history", json::array()},
                   {"created_at", now},
                   {"total_baggages", a["total_baggages"]},
                   {"nonfree_baggages", a["nonfree_baggages"]},
                   {"insurance", a["insurance"]},
                   {"status", "active"}};
  for (const json& pm : a["payment_methods"]) {
    reservation["payment_history"].push_back(
        {{"payment_id", pm["payment_id"]}, {"amount", pm.value("amount", 0.0)}});
  }
  reservations[rid] = reservation;
  user["reservation_ids"].push_back(rid);
  return ok_result(tool, reservation);
}

ToolResult do_cancel(json& entities, const std::string& now, const json& a) {
  const std::string tool = "cancel_reservation";
  const std::string rid = a["reservation_id"];
  json& reservations = entities["reservations"];
  if (!reservations.contains(rid)) {
    return business_error(tool, "reservation not found: " + rid);
  }
  json& res = reservations[rid];
  if (res["status"] != "active") {
    return business_error(tool, "reservation is not active: " + rid);
  }
  if (segment_has_status(entities["flights"], res, "landed")) {
    throw PolicyRejection("cancel_already_flown",
                          "reservation has an already-flown segment");
  }
  if (!cancel_eligible(entities["flights"], res, now)) {
    throw PolicyRejection(
        "cancellation_window",
        "cancellation requires a 24h-old booking, an airline-cancelled "
        "segment, business cabin, or insurance");
  }
  res["status"] = "cancelled";
  return ok_result(tool, res);
}

ToolResult do_update_flights(json& entities, const json& a) {
  const std::string tool = "update_reservation_flights";
  const std::string rid = a["reservation_id"];
  json& reservations = entities["reservations"];
  if (!reservations.contains(rid)) {
    return business_error(tool, "reservation not found: " + rid);
  }
  json& res = reservations[rid];
  if (res["status"] != "active") {
    return business_error(tool, "reservation is not active: " + rid);
  }
  if (res["cabin"] == "basic_economy") {
    throw PolicyRejection("basic_economy_mod",
                          "basic economy reservations cannot be modified");
  }
  if (segment_has_status(entities["flights"], res, "landed")) {
    return business_error(tool, "reservation has an already-flown segment");
  }
  const std::string cabin = a["cabin"];
  if (cabin != "basic_economy" && cabin != "economy" && cabin != "business") {
    return business_error(tool, "unknown cabin: " + cabin);
  }
  if (a["flights"].empty()) return business_error(tool, "no flight segments given");

  json segments = json::array();
  const json& flights = entities["flights"];
  for (const json& seg : a["flights"]) {
    const std::string fid = nested_string(seg, "flight_id", "flights");
    const std::string date = nested_string(seg, "date", "flights");
    if (!day_available(flights, fid, date)) {
      return business_error(tool, "flight not available: " + fid + " on " + date);
    }
    const json& day = flights[fid]["dates"][date];
    if (!day["prices"].contains(cabin)) {
      return business_error(tool, "no " + cabin + " fare on " + fid);
    }
    segments.push_back(
        {{"flight_id", fid}, {"date", date}, {"price", day["prices"][cabin]}});
  }
  const std::string origin = flights[segments.front()["flight_id"]
                                         .get<std::string>()]["origin"];
  const std::string destination = flights[segments.back()["flight_id"]
                                              .get<std::string>()]["destination"];
  if (origin != res["origin"] || destination != res["destination"]) {
    return business_error(tool, "new segments do not match the reservation route");
  }
  res["flights"] = segments;
  res["cabin"] = cabin;
  return ok_result(tool, res);
}

ToolResult do_update_baggage(json& entities, const json& a) {
  const std::string tool = "update_reservation_baggage";
  const std::string rid = a["reservation_id"];
  json& reservations = entities["reservations"];
  if (!reservations.contains(rid)) {
    return business_error(tool, "reservation not found: " + rid);
  }
  json& res = reservations[rid];
  if (res["status"] != "active") {
    return business_error(tool, "reservation is not active: " + rid);
  }
  const long prev_total = res["total_baggages"];
  const long prev_nonfree = res["nonfree_baggages"];
  const long new_total = a["total_baggages"];
  const long new_nonfree = a["nonfree_baggages"];
  if (new_nonfree > new_total || new_nonfree < 0) {
    return business_error(tool, "inconsistent baggage counts");
  }
  if (new_total < prev_total || new_nonfree < prev_nonfree) {
    throw PolicyRejection("baggage_add_only",
                          "checked baggage can be added but never removed");
  }
  res["total_baggages"] = new_total;
  res["nonfree_baggages"] = new_nonfree;
  // Previous counts ride along so that graders can check the add-only rule
  // without replaying the whole history.
  return ok_result(tool, json{{"previous_total_baggages", prev_total},
                              {"previous_nonfree_baggages", prev_nonfree},
                              {"reservation", res}});
}

ToolResult do_send_compensation(json& entities, const json& a) {
  const std::string tool = "send_compensation";
  const std::string user_id = a["user_id"];
  json& users = entities["users"];
  if (!users.contains(user_id)) {
    return business_error(tool, "user not found: " + user_id);
  }
  json& user = users[user_id];
  const double amount = a["amount"];
  if (!(amount > 0)) return business_error(tool, "amount must be positive");
  const std::string membership = user["membership"];
  if (membership != "silver" && membership != "gold") {
    throw PolicyRejection("compensation_membership",
                          "compensation requires silver or gold membership");
  }
  int n = 1;
  for (auto it = user["payment_methods"].begin();
       it != user["payment_methods"].end(); ++it) {
    if (it.key().rfind("comp_cert_", 0) == 0) ++n;
  }
  const std::string cert_id = "comp_cert_" + user_id + "_" + std::to_string(n);
  user["payment_methods"][cert_id] =
      json{{"id", cert_id}, {"source", "certificate"}, {"amount", amount}};
  return ok_result(
      tool, json{{"certificate_id", cert_id}, {"amount", amount}, {"user_id", user_id}});
}

}  // namespace

int64_t parse_timestamp(const std::string& iso) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (std::sscanf(iso.c_str(), "%d-%d-%dT%d:%d:%d", &y, &mo, &d, &h, &mi, &s) < 3) {
    return 0;
  }
  // Days-from-civil (Gregorian), the usual shift-epoch-to-March trick.
  int64_t yy = y - (mo <= 2);
  int64_t era = (yy >= 0 ? yy : yy - 399) / 400;
  unsigned yoe = static_cast<unsigned>(yy - era * 400);
  unsigned doy = (153u * (mo + (mo > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  int64_t days = era * 146097 + static_cast<int64_t>(doe) - 719468;
  return ((days * 24 + h) * 60 + mi) * 60 + s;
}

bool within_hours(const std::string& earlier, const std::string& later,
                  int hours) {
  return parse_timestamp(later) - parse_timestamp(earlier) <
         static_cast<int64_t>(hours) * 3600;
}

ToolResult airline_execute(const Domain& domain, json& entities,
                           const std::string& now, const ToolCall& call) {
  const json& a = call.arguments;
  const std::string& tool = call.name;

  if (tool == "get_user_details") {
    const std::string uid = a["user_id"];
    if (!entities["users"].contains(uid)) {
      return business_error(tool, "user not found: " + uid);
    }
    return ok_result(tool, entities["users"][uid]);
  }

  if (tool == "get_reservation_details") {
    const std::string rid = a["reservation_id"];
    if (!entities["reservations"].contains(rid)) {
      return business_error(tool, "reservation not found: " + rid);
    }
    return ok_result(tool, entities["reservations"][rid]);
  }

  if (tool == "get_flight_status") {
    const std::string fid = a["flight_id"];
    const std::string date = a["date"];
    if (!entities["flights"].contains(fid)) {
      return business_error(tool, "flight not found: " + fid);
    }
    const json& flight = entities["flights"][fid];
    if (!flight["dates"].contains(date)) {
      return business_error(tool, "no schedule for " + fid + " on " + date);
    }
    return ok_result(tool, flight_summary(flight, date));
  }

  if (tool == "search_direct_flight") {
    json results = json::array();
    for (const auto& [fid, flight] : entities["flights"].items()) {
      if (flight["origin"] == a["origin"] &&
          flight["destination"] == a["destination"] &&
          day_available(entities["flights"], fid, a["date"])) {
        results.push_back(flight_summary(flight, a["date"]));
      }
    }
    return ok_result(tool, json{{"flights", results}});
  }

  if (tool == "search_onestop_flight") {
    json results = json::array();
    const json& flights = entities["flights"];
    const std::string date = a["date"];
    for (const auto& [fid1, f1] : flights.items()) {
      if (f1["origin"] != a["origin"] || !day_available(flights, fid1, date)) continue;
      for (const auto& [fid2, f2] : flights.items()) {
        if (f2["origin"] == f1["destination"] &&
            f2["destination"] == a["destination"] &&
            day_available(flights, fid2, date)) {
          results.push_back(
              json::array({flight_summary(f1, date), flight_summary(f2, date)}));
        }
      }
    }
    return ok_result(tool, json{{"itineraries", results}});
  }

  if (tool == "book_reservation") return do_book(entities, now, a);
  if (tool == "cancel_reservation") return do_cancel(entities, now, a);
  if (tool == "update_reservation_flights") return do_update_flights(entities, a);
  if (tool == "update_reservation_baggage") return do_update_baggage(entities, a);
  if (tool == "send_compensation") return do_send_compensation(entities, a);

  // The registry is checked before dispatch, so this is a fixture that
  // declares a tool the semantics do not implement.
  throw UnknownTool("tool '" + tool + "' has no semantics in domain '" +
                    domain.name() + "'");
}

}  // namespace duet::env::detail

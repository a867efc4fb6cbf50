#include "duet/policy/parse.hpp"

#include <array>
#include <optional>

namespace duet::policy {

namespace {

using env::ActionPayload;
using env::ControlSignal;
using env::Empty;
using env::Message;
using env::Role;
using env::ToolCall;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

ParsedAction malformed(std::string reason) {
  ParsedAction p;
  p.ok = false;
  p.error = std::move(reason);
  return p;
}

// Extracts the first <tag>...</tag> span; on success removes it from
// `rest` (text before + after the span stays). Returns nullopt when the
// tag is absent; malformed-ness (unclosed tag) is reported via `error`.
std::optional<std::string> take_tag(std::string& rest, const std::string& tag,
                                    std::string* error) {
  const std::string open = "<" + tag + ">";
  const std::string close = "</" + tag + ">";
  size_t b = rest.find(open);
  if (b == std::string::npos) {
    if (rest.find(close) != std::string::npos) *error = "stray closing " + close;
    return std::nullopt;
  }
  size_t e = rest.find(close, b + open.size());
  if (e == std::string::npos) {
    *error = "unclosed " + open;
    return std::nullopt;
  }
  std::string inner = rest.substr(b + open.size(), e - b - open.size());
  rest = rest.substr(0, b) + rest.substr(e + close.size());
  return inner;
}

ParsedAction parse_function_payload(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return malformed("function payload is not a JSON object");
  }
  if (!j.contains("name") || !j["name"].is_string()) {
    return malformed("function payload needs a string 'name'");
  }
  json args = j.value("arguments", json::object());
  if (!args.is_object()) return malformed("function 'arguments' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "name" && it.key() != "arguments") {
      return malformed("unexpected function key '" + it.key() + "'");
    }
  }
  ParsedAction p;
  p.ok = true;
  p.payload = ToolCall{j["name"].get<std::string>(), std::move(args)};
  return p;
}

struct SignalToken {
  const char* text;
  ControlSignal signal;
};
// Listed strongest first; when several markers appear the strongest wins.
constexpr std::array<SignalToken, 3> kSignals = {{
    {"###STOP###", ControlSignal::stop},
    {"###TRANSFER###", ControlSignal::transfer},
    {"###OUT-OF-SCOPE###", ControlSignal::out_of_scope},
}};

ControlSignal strip_signals(std::string& text) {
  ControlSignal found = ControlSignal::none;
  for (const auto& [token, signal] : kSignals) {
    size_t pos;
    bool any = false;
    while ((pos = text.find(token)) != std::string::npos) {
      text.erase(pos, std::string(token).size());
      any = true;
    }
    if (any && found == ControlSignal::none) found = signal;
  }
  return found;
}

ParsedAction parse_tagged(std::string_view raw, const std::string& body_tag,
                          bool allow_function, bool strip_control_signals) {
  std::string rest(raw);
  std::string error;

  std::string think;
  if (auto t = take_tag(rest, "think", &error)) think = std::string(trim(*t));
  if (!error.empty()) return malformed(error);

  auto body = take_tag(rest, body_tag, &error);
  if (!error.empty()) return malformed(error);
  std::optional<std::string> fn;
  if (allow_function) {
    fn = take_tag(rest, "function", &error);
    if (!error.empty()) return malformed(error);
  }

  if (body && fn) return malformed("both <" + body_tag + "> and <function> present");
  if (!body && !fn) {
    return malformed("missing <" + body_tag + ">" +
                     (allow_function ? " or <function>" : ""));
  }
  if (!trim(rest).empty()) return malformed("stray text outside tags");

  ParsedAction p;
  if (fn) {
    p = parse_function_payload(*fn);
  } else {
    Message m;
    std::string text(*body);
    if (strip_control_signals) m.signal = strip_signals(text);
    m.text = std::string(trim(text));
    p.ok = true;
    p.payload = std::move(m);
  }
  if (p.ok) p.think = think;
  return p;
}

}  // namespace

ParsedAction parse_agent_output(std::string_view raw) {
  return parse_tagged(raw, "message", /*allow_function=*/true,
                      /*strip_control_signals=*/false);
}

ParsedAction parse_user_output(std::string_view raw) {
  return parse_tagged(raw, "answer", /*allow_function=*/true,
                      /*strip_control_signals=*/true);
}

ParsedAction parse_output(Role role, std::string_view raw) {
  return role == Role::agent ? parse_agent_output(raw) : parse_user_output(raw);
}

std::string render_action(Role role, const ActionPayload& payload,
                          std::string_view think) {
  std::string out;
  if (!think.empty()) out += "<think>" + std::string(think) + "</think>";
  if (const auto* call = std::get_if<ToolCall>(&payload)) {
    json j{{"name", call->name}, {"arguments", call->arguments}};
    out += "<function>" + canonical(j) + "</function>";
    return out;
  }
  const auto& msg = std::get<Message>(payload);
  if (role == Role::agent) {
    out += "<message>" + msg.text + "</message>";
  } else {
    std::string text = msg.text;
    if (msg.signal != ControlSignal::none) {
      for (const auto& [token, signal] : kSignals) {
        if (signal == msg.signal) text += (text.empty() ? "" : " ") + std::string(token);
      }
    }
    out += "<answer>" + text + "</answer>";
  }
  return out;
}

json ParsedAction::to_json() const {
  json j{{"ok", ok}, {"think", think}, {"error", error}};
  if (const auto* call = std::get_if<ToolCall>(&payload)) {
    j["kind"] = "tool_call";
    j["name"] = call->name;
    j["arguments"] = call->arguments;
  } else if (const auto* msg = std::get_if<Message>(&payload)) {
    j["kind"] = "message";
    j["text"] = msg->text;
    j["signal"] = signal_name(msg->signal);
  } else {
    j["kind"] = "empty";
  }
  return j;
}

ParsedAction ParsedAction::from_json(const json& j) {
  ParsedAction p;
  p.ok = j.value("ok", false);
  p.think = j.value("think", std::string());
  p.error = j.value("error", std::string());
  const std::string kind = j.value("kind", "empty");
  if (kind == "tool_call") {
    p.payload = ToolCall{j.value("name", std::string()),
                         j.value("arguments", json::object())};
  } else if (kind == "message") {
    Message m;
    m.text = j.value("text", std::string());
    const std::string sig = j.value("signal", "none");
    for (const auto& [token, signal] : kSignals) {
      if (sig == signal_name(signal)) m.signal = signal;
    }
    p.payload = std::move(m);
  }
  return p;
}

json render_chat_messages(const env::Observation& obs,
                          std::string_view extra_system) {
  std::string system = obs.task_context;
  if (!extra_system.empty()) {
    if (!system.empty()) system += "\n\n";
    system += std::string(extra_system);
  }
  if (!obs.tool_schemas.empty()) {
    system += "\n\nTools available to you:\n";
    for (const json& t : obs.tool_schemas) {
      system += "- " + t["name"].get<std::string>() + ": " +
                t["description"].get<std::string>() + " Parameters: ";
      json ps = json::array();
      for (const json& p : t["params"]) {
        ps.push_back({{"name", p["name"]}, {"type", p["type"]}, {"required", p["required"]}});
      }
      system += canonical(ps) + "\n";
    }
  }
  if (obs.role == env::Role::agent) {
    system +=
        "\nRespond with optional <think>...</think> followed by exactly one "
        "of <function>{\"name\": ..., \"arguments\": {...}}</function> or "
        "<message>...</message>. Never both.";
  } else {
    system +=
        "\nRespond with optional <think>...</think> followed by "
        "<answer>...</answer>"
        " (or <function>{...}</function> if you need a tool). End the "
        "conversation by finishing your answer with ###STOP###; use "
        "###TRANSFER### or ###OUT-OF-SCOPE### when appropriate.";
  }

  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", system}});
  const std::string self = env::role_name(obs.role);
  for (const json& ev : obs.visible_history) {
    const std::string kind = ev.value("kind", "");
    const bool own = ev.value("actor", "") == self;
    if (kind == "message") {
      messages.push_back({{"role", own ? "assistant" : "user"},
                          {"content", ev.value("text", std::string())}});
    } else if (kind == "tool_call" && own) {
      json j{{"name", ev["name"]}, {"arguments", ev["arguments"]}};
      messages.push_back(
          {{"role", "assistant"}, {"content", "<function>" + canonical(j) + "</function>"}});
    } else if (kind == "tool_result" && own) {
      json j{{"tool", ev["tool"]}, {"status", ev["status"]}, {"payload", ev["payload"]}};
      messages.push_back({{"role", "tool"}, {"content", canonical(j)}});
    }
  }
  return messages;
}

}  // namespace duet::policy

#include "duet/policy/chat_client.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "duet/errors.hpp"

namespace duet::policy {

json ChatConfig::to_json() const {
  return json{{"base_url", base_url},   {"path", path},
              {"model", model},         {"temperature", temperature},
              {"timeout_ms", timeout_ms}, {"max_retries", max_retries},
              {"api_key_env", api_key_env}};
}

ChatConfig ChatConfig::from_json(const json& j) {
  ChatConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.temperature = j.value("temperature", c.temperature);
  c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  return c;
}

namespace {

void split_url(const std::string& url, std::string& host, int& port, bool& tls) {
  std::string rest = url;
  tls = false;
  if (rest.rfind("https://", 0) == 0) {
    tls = true;
    rest = rest.substr(8);
  } else if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  }
  if (auto slash = rest.find('/'); slash != std::string::npos) rest = rest.substr(0, slash);
  port = tls ? 443 : 80;
  if (auto colon = rest.find(':'); colon != std::string::npos) {
    port = std::atoi(rest.substr(colon + 1).c_str());
    rest = rest.substr(0, colon);
  }
  host = rest;
}

}  // namespace

ChatClient::ChatClient(ChatConfig config) : config_(std::move(config)) {
  split_url(config_.base_url, host_, port_, tls_);
  if (host_.empty()) throw BadConfig("chat client: empty host in base_url");
  if (tls_) throw BadConfig("chat client: https endpoints are not supported in this build");
}

std::string ChatClient::complete(const std::vector<json>& messages, const json& extra) const {
  json body{{"model", config_.model},
            {"messages", messages},
            {"temperature", config_.temperature}};
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) body[it.key()] = it.value();
  }
  const std::string payload = body.dump();

  httplib::Headers headers{{"Content-Type", "application/json"}};
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }

  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    }
    httplib::Client client(host_, port_);
    client.set_connection_timeout(0, config_.timeout_ms * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    auto res = client.Post(config_.path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      last_error = "http status " + std::to_string(res->status);
      continue;
    }
    try {
      json reply = json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      last_error = std::string("malformed completion payload: ") + e.what();
      continue;
    }
  }
  throw RemoteUnavailable("chat endpoint " + config_.base_url + config_.path +
                          " failed after " + std::to_string(config_.max_retries + 1) +
                          " attempts (" + last_error + ")");
}

}  // namespace duet::policy

#include "duet/policy/toy.hpp"

#include <algorithm>
#include <cmath>

#include "duet/env/task.hpp"
#include "duet/errors.hpp"
#include "duet/policy/parse.hpp"

namespace duet::policy {

ToyVocab ToyVocab::for_domain(const env::Domain& domain) {
  ToyVocab v;
  for (const auto& schema : domain.tools()) v.tokens.push_back(schema.name);
  std::sort(v.tokens.begin(), v.tokens.end());
  v.tokens.push_back("say");
  v.tokens.push_back("end");
  return v;
}

int ToyVocab::id(std::string_view name) const {
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == name) return static_cast<int>(i);
  }
  return -1;
}

json ToyParams::to_json() const {
  return json{{"n_features", n_features_}, {"vocab_size", vocab_}, {"table", table_}};
}

ToyParams ToyParams::from_json(const json& j) {
  ToyParams p(require_field<BadConfig>(j, "n_features", "toy params").get<size_t>(),
              require_field<BadConfig>(j, "vocab_size", "toy params").get<size_t>());
  auto table = require_field<BadConfig>(j, "table", "toy params").get<std::vector<double>>();
  if (table.size() != p.n_features() * p.vocab_size()) {
    throw BadConfig("toy parameter table has wrong size");
  }
  p.flat() = std::move(table);
  return p;
}

ToyContext toy_featurize(const env::Observation& obs) {
  ToyContext ctx{0, 0, std::min(obs.turn, 15)};
  // Scan visible history backwards for the most recent tool result and the
  // most recent message speaker.
  for (auto it = obs.visible_history.rbegin(); it != obs.visible_history.rend(); ++it) {
    const json& ev = *it;
    const std::string kind = ev.value("kind", "");
    if (ctx.last_status == 0 && kind == "tool_result") {
      const std::string status = ev.value("status", "");
      if (status == "ok") ctx.last_status = 1;
      else if (status == "error") ctx.last_status = 2;
      else ctx.last_status = 3;
    }
    if (ctx.last_speaker == 0 && kind == "message") {
      ctx.last_speaker = ev.value("actor", "") == "agent" ? 1 : 2;
    }
    if (ctx.last_status != 0 && ctx.last_speaker != 0) break;
  }
  return ctx;
}

size_t toy_feature_index(const ToyContext& ctx, int prev_token, size_t n_features) {
  uint64_t h = hash_mix(static_cast<uint64_t>(ctx.last_status),
                        static_cast<uint64_t>(ctx.last_speaker) * 16 +
                            static_cast<uint64_t>(ctx.turn));
  h = hash_mix(h, static_cast<uint64_t>(prev_token));
  return static_cast<size_t>(h % n_features);
}

std::vector<double> toy_row_logprobs(const ToyParams& params, size_t feature) {
  const size_t v = params.vocab_size();
  std::vector<double> out(v);
  double maxv = -std::numeric_limits<double>::infinity();
  for (size_t t = 0; t < v; ++t) maxv = std::max(maxv, params.at(feature, t));
  double denom = 0.0;
  for (size_t t = 0; t < v; ++t) denom += std::exp(params.at(feature, t) - maxv);
  const double log_denom = maxv + std::log(denom);
  for (size_t t = 0; t < v; ++t) out[t] = params.at(feature, t) - log_denom;
  return out;
}

double toy_token_logprob(const ToyParams& params, size_t feature, int token) {
  return toy_row_logprobs(params, feature)[static_cast<size_t>(token)];
}

ToyPolicy::ToyPolicy(std::shared_ptr<const ToyParams> params, ToyVocab vocab,
                     json tool_arguments, std::string say_text)
    : params_(std::move(params)), vocab_(std::move(vocab)),
      tool_arguments_(std::move(tool_arguments)), say_text_(std::move(say_text)) {
  if (params_->vocab_size() != vocab_.size()) {
    throw BadConfig("toy parameter table does not match vocabulary size");
  }
  if (!tool_arguments_.is_object()) tool_arguments_ = json::object();
}

std::unique_ptr<ToyPolicy> ToyPolicy::for_task(std::shared_ptr<const ToyParams> params,
                                               const env::Domain& domain,
                                               const env::TaskSpec& task) {
  json args = json::object();
  if (task.selected_parameters.is_object() && task.selected_parameters.contains("tool_arguments")) {
    args = task.selected_parameters.at("tool_arguments");
  }
  return std::make_unique<ToyPolicy>(std::move(params), ToyVocab::for_domain(domain),
                                     std::move(args));
}

PolicyOutput ToyPolicy::act(const env::Observation& obs, Rng& rng) {
  const ToyContext ctx = toy_featurize(obs);
  PolicyOutput out;
  int prev = vocab_.bos_token();
  for (int pos = 0; pos < kMaxTokensPerTurn; ++pos) {
    const size_t feature = toy_feature_index(ctx, prev, params_->n_features());
    const auto logprobs = toy_row_logprobs(*params_, feature);
    // Inverse-CDF sample from the softmax row.
    const double u = rng.uniform();
    double acc = 0.0;
    int token = static_cast<int>(logprobs.size()) - 1;
    for (size_t t = 0; t < logprobs.size(); ++t) {
      acc += std::exp(logprobs[t]);
      if (u < acc) {
        token = static_cast<int>(t);
        break;
      }
    }
    out.token_ids.push_back(token);
    out.token_logprobs.push_back(logprobs[static_cast<size_t>(token)]);
    prev = token;
    if (token == vocab_.end_token()) break;
  }

  // The first token decides what the turn does; trailing tokens only pad
  // the sequence so that credit assignment has more than one site.
  const int head = out.token_ids.front();
  env::ActionPayload payload;
  if (head == vocab_.say_token() || head == vocab_.end_token()) {
    payload = env::Message{say_text_, env::ControlSignal::none};
  } else {
    const std::string& tool = vocab_.tokens[static_cast<size_t>(head)];
    json args = tool_arguments_.contains(tool) ? tool_arguments_.at(tool) : json::object();
    payload = env::ToolCall{tool, std::move(args)};
  }
  out.raw = render_action(env::Role::agent, payload);
  out.parsed = parse_agent_output(out.raw);
  return out;
}

}  // namespace duet::policy

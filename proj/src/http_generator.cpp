// SPDX-License-Identifier: Apache-2.0

#include "steer/http_generator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "steer/errors.hpp"

namespace steer::generators {

using nlohmann::json;

namespace {

constexpr int kMaxAttempts = 3;
constexpr char kCompletionsPath[] = "/v1/completions";
constexpr char kModelsPath[] = "/v1/models";

// httplib clients are not safe for concurrent requests, so each call gets its
// own connection; the engine caps in-flight requests per GeneratorSpec.
httplib::Client make_client(const std::string& base_url, const std::string& bearer) {
  httplib::Client client(base_url);
  client.set_connection_timeout(10, 0);
  client.set_read_timeout(300, 0);
  if (!bearer.empty()) client.set_bearer_token_auth(bearer);
  return client;
}

std::uint64_t prompt_tokens_of(const json& response, const std::string& prompt) {
  if (response.contains("usage") && response["usage"].contains("prompt_tokens")) {
    return response["usage"]["prompt_tokens"].get<std::uint64_t>();
  }
  return approx_prompt_tokens(prompt);
}

double max_logprob_at(const json& logprobs, std::size_t index) {
  // Prefer the top-k map; fall back to the sampled token's logprob.
  if (logprobs.contains("top_logprobs") && logprobs["top_logprobs"].is_array() &&
      index < logprobs["top_logprobs"].size()) {
    const json& top = logprobs["top_logprobs"][index];
    if (top.is_object() && !top.empty()) {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& [tok, lp] : top.items()) best = std::max(best, lp.get<double>());
      return best;
    }
  }
  const json& lps = logprobs.at("token_logprobs");
  if (index >= lps.size() || lps[index].is_null()) {
    throw GeneratorError("completion response: missing logprob for token " +
                         std::to_string(index));
  }
  return lps[index].get<double>();
}

}  // namespace

HttpGenerator::HttpGenerator(GeneratorSpec spec, int retry_backoff_ms)
    : spec_(std::move(spec)), retry_backoff_ms_(retry_backoff_ms) {
  spec_.validate();
  if (spec_.backend != Backend::http) {
    throw ConfigError("HttpGenerator requires an http backend spec");
  }
  if (const char* key = std::getenv("STEER_API_KEY")) bearer_token_ = key;
}

void HttpGenerator::preflight() const {
  auto client = make_client(spec_.endpoint, bearer_token_);
  auto res = client.Get(kModelsPath);
  if (!res) {
    throw GeneratorError(spec_.name + ": endpoint unreachable: " + spec_.endpoint + " (" +
                         httplib::to_string(res.error()) + ")");
  }
}

StepGeneration HttpGenerator::generate_step(const std::string& prompt) {
  if (prompt.empty()) throw GeneratorError(spec_.name + ": empty prompt");

  json request;
  request["model"] = spec_.name;
  request["prompt"] = prompt;
  request["temperature"] = spec_.temperature;
  request["stop"] = json::array({spec_.stop_sequence});
  request["max_tokens"] = spec_.max_tokens_per_step;
  request["logprobs"] = 1;

  const std::string body = request.dump();
  httplib::Result res;
  for (int attempt = 0;; ++attempt) {
    auto client = make_client(spec_.endpoint, bearer_token_);
    res = client.Post(kCompletionsPath, body, "application/json");
    const bool transport_error = !res;
    const bool server_error = res && res->status >= 500;
    if (!transport_error && !server_error) break;
    if (attempt + 1 >= kMaxAttempts) {
      throw GeneratorError(spec_.name + ": request failed after " +
                           std::to_string(kMaxAttempts) + " attempts" +
                           (res ? " (HTTP " + std::to_string(res->status) + ")"
                                : " (" + httplib::to_string(res.error()) + ")"));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(retry_backoff_ms_ << attempt));
  }
  if (res->status >= 400) {
    throw GeneratorError(spec_.name + ": HTTP " + std::to_string(res->status) + ": " + res->body);
  }

  json response;
  try {
    response = json::parse(res->body);
  } catch (const json::exception& e) {
    throw GeneratorError(spec_.name + ": malformed completion response: " + e.what());
  }

  if (!response.contains("choices") || response["choices"].empty()) {
    throw GeneratorError(spec_.name + ": completion response has no choices");
  }
  const json& choice = response["choices"][0];
  if (!choice.contains("logprobs") || choice["logprobs"].is_null() ||
      !choice["logprobs"].contains("tokens")) {
    throw GeneratorError(spec_.name + ": completion response lacks logprobs");
  }
  const json& logprobs = choice["logprobs"];
  const json& token_texts = logprobs["tokens"];

  // Rebuild the step from its tokens so confidences stay aligned when the
  // server ignored the stop sequence and the text must be cut at the first
  // separator.
  StepGeneration out;
  std::string accumulated;
  for (std::size_t j = 0; j < token_texts.size(); ++j) {
    const std::string tok = token_texts[j].get<std::string>();
    const std::size_t before = accumulated.size();
    accumulated += tok;
    const auto sep = accumulated.find(spec_.stop_sequence);
    const bool cut = sep != std::string::npos;
    const std::size_t keep_until = cut ? sep : accumulated.size();
    if (keep_until > before) {
      confidence::TokenObservation obs;
      const double lp = max_logprob_at(logprobs, j);
      if (!std::isfinite(lp)) {
        throw GeneratorError(spec_.name + ": non-finite logprob in response");
      }
      obs.text = accumulated.substr(before, keep_until - before);
      obs.max_logit = lp;
      obs.max_prob = std::clamp(std::exp(lp), 0.0, 1.0);
      obs.entropy = 0.0;  // not derivable from top-1 logprobs; metric rejected in config
      obs.source = confidence::Source::logprobs_proxy;
      out.tokens.push_back(std::move(obs));
    }
    if (cut) {
      out.text = accumulated.substr(0, sep);
      out.eos = false;
      out.prompt_tokens = prompt_tokens_of(response, prompt);
      return out;
    }
  }
  out.text = accumulated;

  const std::string finish = choice.value("finish_reason", "");
  if (finish == "stop") {
    // Servers that report the matched stop string (vLLM stop_reason, sglang
    // matched_stop) let us separate stop-sequence hits from natural EOS; a
    // bare "stop" is taken as EOS.
    const bool matched_stop =
        (choice.contains("stop_reason") && !choice["stop_reason"].is_null()) ||
        (choice.contains("matched_stop") && !choice["matched_stop"].is_null());
    out.eos = !matched_stop;
  } else {
    out.eos = false;  // "length" or other: step ended by the token cap
  }
  out.prompt_tokens = prompt_tokens_of(response, prompt);
  return out;
}

}  // namespace steer::generators

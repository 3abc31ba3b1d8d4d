// SPDX-License-Identifier: Apache-2.0

#include "steer/confidence.hpp"

#include <algorithm>
#include <cmath>

#include "steer/errors.hpp"

namespace steer::confidence {

TokenObservation token_confidence(std::span<const double> logits) {
  if (logits.empty()) {
    throw InvalidInputError("token_confidence: empty logit vector");
  }
  for (double z : logits) {
    if (!std::isfinite(z)) {
      throw InvalidInputError("token_confidence: non-finite logit");
    }
  }

  const double m = *std::max_element(logits.begin(), logits.end());

  // Softmax statistics with the max-shift trick. With p_i = exp(z_i - lnZ):
  //   max_prob = exp(m - lnZ) = 1 / sum_exp
  //   H        = ln(sum_exp) - sum_i p_i (z_i - m)
  double sum_exp = 0.0;
  for (double z : logits) {
    sum_exp += std::exp(z - m);
  }
  double weighted = 0.0;
  for (double z : logits) {
    weighted += std::exp(z - m) / sum_exp * (z - m);
  }

  TokenObservation obs;
  obs.max_logit = m;
  obs.max_prob = 1.0 / sum_exp;
  obs.entropy = std::max(0.0, std::log(sum_exp) - weighted);
  obs.source = Source::raw_logits;
  return obs;
}

namespace {

constexpr std::string_view kAsciiMathChars = "+-*/=<>^_()[]{}%!|";

// UTF-8 byte sequences for the non-ASCII operators. ASCII '-' above doubles
// as the minus sign, which is how tokenizers usually emit it.
constexpr std::string_view kUtf8MathSeqs[] = {
    "\xe2\x88\x92",  // − U+2212 minus
    "\xe2\x88\x9a",  // √ U+221A
    "\xe2\x89\xa4",  // ≤ U+2264
    "\xe2\x89\xa5",  // ≥ U+2265
    "\xe2\x89\xa0",  // ≠ U+2260
};

}  // namespace

bool is_math_token(std::string_view text) {
  for (char c : text) {
    if (c >= '0' && c <= '9') return true;
    if (c == '\\') return true;
    if (kAsciiMathChars.find(c) != std::string_view::npos) return true;
  }
  for (std::string_view seq : kUtf8MathSeqs) {
    if (text.find(seq) != std::string_view::npos) return true;
  }
  return false;
}

namespace {

double metric_value(const TokenObservation& t, Metric metric) {
  switch (metric) {
    case Metric::max_logit:
      return t.max_logit;
    case Metric::max_prob:
      return t.max_prob;
    case Metric::entropy:
      return -t.entropy;  // higher = more confident
  }
  throw InvalidInputError("aggregate_step: unknown metric");
}

}  // namespace

StepConfidence aggregate_step(const std::vector<TokenObservation>& tokens,
                              Metric metric, Aggregation aggregation) {
  if (tokens.empty()) {
    throw InvalidInputError("aggregate_step: empty token list");
  }

  double sum_all = 0.0;
  double sum_math = 0.0;
  std::size_t n_math = 0;
  for (const auto& t : tokens) {
    const double v = metric_value(t, metric);
    sum_all += v;
    if (is_math_token(t.text)) {
      sum_math += v;
      ++n_math;
    }
  }

  double value = sum_all / static_cast<double>(tokens.size());
  if (aggregation == Aggregation::math_tokens_mean && n_math > 0) {
    value = sum_math / static_cast<double>(n_math);
  }

  StepConfidence out;
  out.value = value;
  out.metric = metric;
  out.aggregation = aggregation;
  out.token_count = tokens.size();
  return out;
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::max_logit: return "max_logit";
    case Metric::max_prob: return "max_prob";
    case Metric::entropy: return "entropy";
  }
  return "?";
}

std::string_view to_string(Aggregation a) {
  switch (a) {
    case Aggregation::all_tokens_mean: return "all_tokens_mean";
    case Aggregation::math_tokens_mean: return "math_tokens_mean";
  }
  return "?";
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::raw_logits: return "raw_logits";
    case Source::logprobs_proxy: return "logprobs_proxy";
  }
  return "?";
}

Metric metric_from_string(std::string_view s) {
  if (s == "max_logit") return Metric::max_logit;
  if (s == "max_prob") return Metric::max_prob;
  if (s == "entropy") return Metric::entropy;
  throw InvalidInputError("unknown metric: " + std::string(s));
}

Aggregation aggregation_from_string(std::string_view s) {
  if (s == "all_tokens_mean") return Aggregation::all_tokens_mean;
  if (s == "math_tokens_mean") return Aggregation::math_tokens_mean;
  throw InvalidInputError("unknown aggregation: " + std::string(s));
}

}  // namespace steer::confidence

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace steer::confidence {

// Where a token's confidence numbers came from. raw_logits means max_logit is
// the maximum over a full vocabulary logit vector; logprobs_proxy means the
// backend only exposed top-k log-probabilities and max_logit is the largest
// returned log-probability.
enum class Source { raw_logits, logprobs_proxy };

enum class Metric { max_logit, max_prob, entropy };

enum class Aggregation { all_tokens_mean, math_tokens_mean };

struct TokenObservation {
  std::string text;
  double max_logit = 0.0;
  double max_prob = 0.0;  // in [0,1]
  double entropy = 0.0;   // nats, >= 0; stored raw, negated only at aggregation
  Source source = Source::raw_logits;
};

// Step-level confidence: the declared aggregation of the declared metric over
// the step's tokens. Exactly recomputable from the token list.
struct StepConfidence {
  double value = 0.0;
  Metric metric = Metric::max_logit;
  Aggregation aggregation = Aggregation::all_tokens_mean;
  std::size_t token_count = 0;  // tokens in the step (>= 1)
};

/// Confidence numbers for one token from its full vocabulary logit vector:
/// max logit, softmax maximum, and Shannon entropy of the softmax (nats).
/// Throws InvalidInputError on an empty vector or any non-finite entry.
TokenObservation token_confidence(std::span<const double> logits);

/// True iff the token looks like part of a mathematical expression: contains
/// a decimal digit, a backslash (LaTeX), or an operator/symbol character from
/// + - * / = < > ^ _ ( ) [ ] { } % ! | and the UTF-8 forms of − √ ≤ ≥ ≠.
bool is_math_token(std::string_view text);

/// Aggregate token confidences into a step confidence. math_tokens_mean falls
/// back to the all-token mean when no token qualifies, so the score is total
/// on every step. For Metric::entropy the aggregated value is the negated
/// entropy: higher always means more confident.
/// Throws InvalidInputError on an empty token list.
StepConfidence aggregate_step(const std::vector<TokenObservation>& tokens,
                              Metric metric, Aggregation aggregation);

std::string_view to_string(Metric m);
std::string_view to_string(Aggregation a);
std::string_view to_string(Source s);
Metric metric_from_string(std::string_view s);
Aggregation aggregation_from_string(std::string_view s);

}  // namespace steer::confidence

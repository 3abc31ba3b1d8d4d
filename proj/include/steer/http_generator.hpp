// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "steer/generators.hpp"

namespace steer::generators {

// Client for OpenAI-compatible completion endpoints with per-token logprobs.
// spec.endpoint is the server base URL; the client posts to /v1/completions
// and preflights /v1/models. Bearer auth comes from STEER_API_KEY. Token
// confidences use the max-logprob proxy (source = logprobs_proxy); a response
// without logprobs is a hard error, never a defaulted confidence.
class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(GeneratorSpec spec, int retry_backoff_ms = 50);

  StepGeneration generate_step(const std::string& prompt) override;
  const GeneratorSpec& spec() const override { return spec_; }

  /// Transport-level reachability probe (GET /v1/models); any HTTP status
  /// counts as reachable. Throws GeneratorError when the host cannot be
  /// reached, so a bad endpoint fails before any trace starts.
  void preflight() const;

 private:
  GeneratorSpec spec_;
  std::string bearer_token_;
  int retry_backoff_ms_;
};

}  // namespace steer::generators

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "steer/cost.hpp"
#include "steer/event_log.hpp"
#include "steer/generators.hpp"
#include "steer/mixture.hpp"
#include "steer/routing.hpp"
#include "steer/trace.hpp"

namespace steer::engine {

struct EngineConfig {
  std::size_t max_steps = 64;  // N
  double gamma = 0.5;
  confidence::Aggregation aggregation = confidence::Aggregation::all_tokens_mean;
  confidence::Metric metric = confidence::Metric::max_logit;
  std::size_t group_count = 1;  // K independent question groups
  double temperature = 0.7;
  mixture::EmConfig em;
  std::int64_t seed = 0;
  // Fit one mixture per generating model instead of pooling both models'
  // step confidences. Off by default.
  bool per_model_fit = false;
  // Warm-start each step's EM from the previous successful fit instead of
  // refitting from the percentile initialization. Off by default.
  bool warm_start = false;

  void validate() const;  // throws ConfigError
};

struct Question {
  std::string id;
  std::string prompt;
};

struct RunResult {
  std::vector<Trace> traces;
  cost::CostLedger ledger;
};

struct SegmentResult {
  std::string step_text;
  bool hit_separator = false;
  bool hit_eos = false;
};

/// Cut one reasoning step out of generated text: the prefix up to (excluding)
/// the first step separator. eos_signaled reports the generator's own
/// end-of-sequence signal; it only counts when no separator came first.
SegmentResult segment_step(std::string_view generated_text, bool eos_signaled);

/// True iff the trace can take no further step: the last step hit EOS or the
/// step budget is exhausted.
bool is_complete(const Trace& trace, const EngineConfig& config);

/// Deterministic seeded partition into K groups whose sizes differ by at
/// most one. Throws InvalidInputError when K is zero or exceeds the number
/// of questions.
std::vector<std::vector<Question>> group_split(const std::vector<Question>& questions,
                                               std::size_t group_count,
                                               std::int64_t seed);

/// Step-synchronized batched generation with per-step mixture fitting and
/// posterior-threshold routing: step 0 for every question via the small
/// generator, unconfident first steps regenerated by the large one, then
/// iterative routing on each previous step's confidence until every trace
/// completes or the step budget runs out.
RunResult run_steer(const std::vector<Question>& questions, generators::Generator& small,
                    generators::Generator& large, const EngineConfig& config,
                    events::EventSink& sink);

/// Same loop under an arbitrary routing policy (posterior threshold,
/// percentile ablation, or the static baselines).
RunResult run_with_policy(const std::vector<Question>& questions,
                          generators::Generator& small, generators::Generator& large,
                          const EngineConfig& config, const routing::RoutingPolicy& policy,
                          events::EventSink& sink);

/// Split questions into config.group_count groups, run each independently
/// (its own per-step fits), and aggregate traces and ledgers.
RunResult run_grouped(const std::vector<Question>& questions, generators::Generator& small,
                      generators::Generator& large, const EngineConfig& config,
                      const routing::RoutingPolicy& policy, events::EventSink& sink);

/// Questions named by a scripted scenario, in scenario order.
std::vector<Question> questions_from_scenario(const generators::ScriptedScenario& scenario);

}  // namespace steer::engine

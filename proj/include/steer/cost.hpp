// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "steer/trace.hpp"

namespace steer::cost {

/// Inference cost of generating `tokens` tokens with an N-parameter
/// transformer: 2 * N * tokens, reported in units of 1e12 FLOPs.
double flops_for(std::uint64_t param_count, std::uint64_t tokens);

/// Accuracy (percent convention) divided by average per-query FLOPs.
/// Throws InvalidInputError when avg_flops is not positive.
double accuracy_per_flops(double accuracy, double avg_flops);

// Fraction of large-model steps by relative step position. Step i (0-based)
// of an L-step trace lands in the decile covering (i+1)/L; bin k spans
// (k/10, (k+1)/10].
struct UsageProfile {
  std::array<std::uint64_t, 10> large_steps{};
  std::array<std::uint64_t, 10> total_steps{};

  double ratio(std::size_t bin) const {
    return total_steps[bin] == 0
               ? 0.0
               : static_cast<double>(large_steps[bin]) / static_cast<double>(total_steps[bin]);
  }
};

/// Pool step/model counts over all traces (traces with no steps contribute
/// nothing). Throws InvalidInputError when traces is empty.
UsageProfile usage_profile(const std::vector<Trace>& traces);

struct TraceCost {
  std::string trace_id;
  std::uint64_t tokens_small = 0;
  std::uint64_t tokens_large = 0;
  TraceStatus status = TraceStatus::ongoing;
  std::optional<bool> correct;
};

struct ModelTotals {
  std::uint64_t param_count = 0;
  std::uint64_t generated_tokens = 0;
  std::uint64_t prompt_tokens = 0;  // prefill; reported, excluded from headline FLOPs
  double flops = 0.0;               // generated tokens only, 1e12 units
  // Where this model's confidences came from; logprobs_proxy marks that phi
  // is the max returned log-probability, not a raw vocabulary max-logit.
  std::string confidence_source;
};

// Per-model and per-trace cost accounting for one run. Token counters are
// accumulated by the engine; finalize() derives FLOPs, usage statistics, and
// the summary. Averages are per-query means over all questions; failed traces
// keep their spent cost and count as incorrect.
struct CostLedger {
  std::map<std::string, ModelTotals> models;  // keyed by generator name
  std::vector<TraceCost> per_trace;
  UsageProfile usage;
  std::optional<UsageProfile> usage_correct;
  std::optional<UsageProfile> usage_incorrect;

  std::size_t questions = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::optional<double> accuracy;  // percent, present when correctness labels exist
  double total_flops = 0.0;
  double avg_flops = 0.0;
  std::optional<double> a_per_f;
  double large_usage_rate = 0.0;  // large steps / total steps, whole run

  void add_generated(const std::string& model, std::uint64_t tokens);
  void add_prompt(const std::string& model, std::uint64_t tokens);
  void note_confidence_source(const std::string& model, std::string_view source);

  /// Recompute every derived field from the counters and the final traces.
  void finalize(const std::vector<Trace>& traces);

  /// Merge another run's counters and per-trace records (used by grouped
  /// runs); finalize must be called on the merged result afterwards.
  void absorb(const CostLedger& other);
};

}  // namespace steer::cost

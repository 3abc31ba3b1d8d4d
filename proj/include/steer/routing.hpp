// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "steer/mixture.hpp"

namespace steer::routing {

enum class ModelChoice { small, large };

std::string_view to_string(ModelChoice m);
ModelChoice model_choice_from_string(std::string_view s);

enum class PolicyKind { posterior_threshold, percentile, always_small, always_large };

// Decision rule mapping a confidence signal to a model choice. gamma is
// meaningful only for posterior_threshold, percentile_p only for percentile.
struct RoutingPolicy {
  PolicyKind kind = PolicyKind::posterior_threshold;
  std::optional<double> gamma;         // in [0,1]
  std::optional<double> percentile_p;  // in [0,100]
};

/// Validates the parameter-present-iff-required invariant; throws ConfigError.
void validate(const RoutingPolicy& policy);

std::string_view to_string(PolicyKind k);
PolicyKind policy_kind_from_string(std::string_view s);

// One trace's step confidence, as fed to a batch routing rule.
struct ConfidencePoint {
  std::string trace_id;
  double phi = 0.0;
};

// Disjoint cover of the input batch; order within each side follows the input.
struct Partition {
  std::vector<std::string> small_ids;
  std::vector<std::string> large_ids;
};

/// Threshold rule: small iff posterior >= gamma (boundary inclusive).
ModelChoice decide(double posterior, double gamma);

/// Route a batch through decide(posterior_confident(phi, params), gamma).
/// When params carries the weak-separation flag there is no identifiable
/// unconfident cluster, and every trace is kept on the small model.
Partition classify_batch(const std::vector<ConfidencePoint>& confidences,
                         const mixture::MixtureParams& params, double gamma);

/// Percentile ablation rule: traces with phi strictly below the p-th
/// percentile of the batch go large; ties at the percentile value stay small.
/// The percentile is nearest-rank on the sorted sample: the value at
/// 0-based index min(n-1, ceil(p*n/100)).
Partition percentile_route(const std::vector<ConfidencePoint>& confidences, double p);

/// The cutoff value used by percentile_route, exposed for audit tooling.
double percentile_cutoff(std::vector<double> values, double p);

}  // namespace steer::routing

// SPDX-License-Identifier: Apache-2.0

#include "steer/routing.hpp"

#include <algorithm>
#include <cmath>

#include "steer/errors.hpp"

namespace steer::routing {

std::string_view to_string(ModelChoice m) {
  return m == ModelChoice::small ? "small" : "large";
}

ModelChoice model_choice_from_string(std::string_view s) {
  if (s == "small") return ModelChoice::small;
  if (s == "large") return ModelChoice::large;
  throw InvalidInputError("unknown model choice: " + std::string(s));
}

void validate(const RoutingPolicy& policy) {
  const bool needs_gamma = policy.kind == PolicyKind::posterior_threshold;
  const bool needs_p = policy.kind == PolicyKind::percentile;
  if (needs_gamma != policy.gamma.has_value()) {
    throw ConfigError(needs_gamma ? "routing policy: gamma required"
                                  : "routing policy: gamma not applicable");
  }
  if (needs_p != policy.percentile_p.has_value()) {
    throw ConfigError(needs_p ? "routing policy: percentile_p required"
                              : "routing policy: percentile_p not applicable");
  }
  if (policy.gamma && (*policy.gamma < 0.0 || *policy.gamma > 1.0 || !std::isfinite(*policy.gamma))) {
    throw ConfigError("routing policy: gamma outside [0,1]");
  }
  if (policy.percentile_p &&
      (*policy.percentile_p < 0.0 || *policy.percentile_p > 100.0 || !std::isfinite(*policy.percentile_p))) {
    throw ConfigError("routing policy: percentile_p outside [0,100]");
  }
}

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::posterior_threshold: return "posterior_threshold";
    case PolicyKind::percentile: return "percentile";
    case PolicyKind::always_small: return "always_small";
    case PolicyKind::always_large: return "always_large";
  }
  return "?";
}

PolicyKind policy_kind_from_string(std::string_view s) {
  if (s == "posterior_threshold") return PolicyKind::posterior_threshold;
  if (s == "percentile") return PolicyKind::percentile;
  if (s == "always_small") return PolicyKind::always_small;
  if (s == "always_large") return PolicyKind::always_large;
  throw InvalidInputError("unknown policy kind: " + std::string(s));
}

ModelChoice decide(double posterior, double gamma) {
  if (!(posterior >= 0.0 && posterior <= 1.0)) {
    throw InvalidInputError("decide: posterior outside [0,1]");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidInputError("decide: gamma outside [0,1]");
  }
  return posterior >= gamma ? ModelChoice::small : ModelChoice::large;
}

Partition classify_batch(const std::vector<ConfidencePoint>& confidences,
                         const mixture::MixtureParams& params, double gamma) {
  if (confidences.empty()) throw InvalidInputError("classify_batch: empty batch");
  mixture::validate(params);

  Partition out;
  for (const auto& point : confidences) {
    ModelChoice choice = ModelChoice::small;
    if (!params.weak_separation) {
      choice = decide(mixture::posterior_confident(point.phi, params), gamma);
    }
    (choice == ModelChoice::small ? out.small_ids : out.large_ids).push_back(point.trace_id);
  }
  return out;
}

double percentile_cutoff(std::vector<double> values, double p) {
  if (values.empty()) throw InvalidInputError("percentile_cutoff: empty sample");
  if (!(p >= 0.0 && p <= 100.0)) throw InvalidInputError("percentile_cutoff: p outside [0,100]");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  const double rank = std::ceil(p * static_cast<double>(n) / 100.0);
  const auto idx = std::min<std::size_t>(n - 1, static_cast<std::size_t>(rank));
  return values[idx];
}

Partition percentile_route(const std::vector<ConfidencePoint>& confidences, double p) {
  if (confidences.empty()) throw InvalidInputError("percentile_route: empty batch");

  std::vector<double> values;
  values.reserve(confidences.size());
  for (const auto& point : confidences) values.push_back(point.phi);
  const double cutoff = percentile_cutoff(std::move(values), p);

  Partition out;
  for (const auto& point : confidences) {
    (point.phi < cutoff ? out.large_ids : out.small_ids).push_back(point.trace_id);
  }
  return out;
}

}  // namespace steer::routing

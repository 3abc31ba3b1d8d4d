// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace steer::mixture {

// Fitted two-component univariate Gaussian mixture over step confidences.
// Components are labeled so the confident one has the higher mean:
// mean_u <= mean_c, weight_c + weight_u = 1 (within 1e-12), variances above
// the configured floor. weak_separation is set when the two components are
// too close (or one too light) for the bimodality assumption to hold;
// downstream routing treats every score as confident in that case.
struct MixtureParams {
  double weight_c = 0.5;
  double weight_u = 0.5;
  double mean_c = 0.0;
  double mean_u = 0.0;
  double var_c = 1.0;
  double var_u = 1.0;
  bool weak_separation = false;
};

struct EmConfig {
  std::size_t max_iterations = 200;
  double loglik_tolerance = 1e-6;
  double variance_floor = 1e-8;
  std::size_t min_samples = 4;
  std::int64_t seed = 0;
  // Optional warm start: initialize EM from a previous fit instead of the
  // percentile-based default.
  std::optional<MixtureParams> warm_start;
};

struct FitResult {
  MixtureParams params;
  // Log-likelihood evaluated at the parameters entering each iteration;
  // non-decreasing by the EM guarantee.
  std::vector<double> loglik_trajectory;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Validates the parameter invariants above; throws InvalidInputError.
void validate(const MixtureParams& params);

/// log N(x; mean, var), the univariate Gaussian log-density.
double log_gaussian_pdf(double x, double mean, double var);

/// Fit the two-component mixture by EM. Initialization: means at the 25th and
/// 75th sample percentiles, equal weights, both variances at the pooled sample
/// variance (unless config.warm_start is set). Variances are floored inside
/// the M-step. Throws InsufficientDataError when samples.size() <
/// config.min_samples and DegenerateFitError when all samples are identical.
FitResult fit_em(std::span<const double> samples, const EmConfig& config);

/// Sum over samples of ln[w_c N(x; mean_c, var_c) + w_u N(x; mean_u, var_u)],
/// accumulated in the log domain.
double log_likelihood(std::span<const double> samples,
                      const MixtureParams& params);

/// Posterior probability that a step confidence originates from the confident
/// component, computed with log-domain stabilization and clamped to [0,1].
double posterior_confident(double phi, const MixtureParams& params);

}  // namespace steer::mixture

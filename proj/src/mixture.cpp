// SPDX-License-Identifier: Apache-2.0

#include "steer/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "steer/errors.hpp"

namespace steer::mixture {

namespace {

constexpr double kWeightSumTolerance = 1e-12;
constexpr double kMeanGapCollapse = 1e-6;
constexpr double kWeightCollapse = 1e-3;

// ln(exp(a) + exp(b)) without overflow; tolerates -inf arguments.
double log_add_exp(double a, double b) {
  if (std::isinf(a) && a < 0) return b;
  if (std::isinf(b) && b < 0) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Nearest-rank sample quantile on a sorted copy; only used for EM init.
double sorted_quantile(const std::vector<double>& sorted, double q) {
  const auto n = sorted.size();
  auto idx = static_cast<std::size_t>(q * static_cast<double>(n - 1));
  idx = std::min(idx, n - 1);
  return sorted[idx];
}

}  // namespace

void validate(const MixtureParams& p) {
  const bool finite = std::isfinite(p.weight_c) && std::isfinite(p.weight_u) &&
                      std::isfinite(p.mean_c) && std::isfinite(p.mean_u) &&
                      std::isfinite(p.var_c) && std::isfinite(p.var_u);
  if (!finite) throw InvalidInputError("MixtureParams: non-finite field");
  if (p.weight_c < 0.0 || p.weight_c > 1.0 || p.weight_u < 0.0 || p.weight_u > 1.0) {
    throw InvalidInputError("MixtureParams: weights outside [0,1]");
  }
  if (std::abs(p.weight_c + p.weight_u - 1.0) > kWeightSumTolerance) {
    throw InvalidInputError("MixtureParams: weights do not sum to 1");
  }
  if (p.var_c <= 0.0 || p.var_u <= 0.0) {
    throw InvalidInputError("MixtureParams: non-positive variance");
  }
  if (p.mean_u > p.mean_c) {
    throw InvalidInputError("MixtureParams: mean_u exceeds mean_c");
  }
}

double log_gaussian_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

FitResult fit_em(std::span<const double> samples, const EmConfig& config) {
  const std::size_t n = samples.size();
  if (n < config.min_samples) {
    throw InsufficientDataError("fit_em: " + std::to_string(n) + " samples, need " +
                                std::to_string(config.min_samples));
  }
  for (double x : samples) {
    if (!std::isfinite(x)) throw InvalidInputError("fit_em: non-finite sample");
  }

  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  if (*lo_it == *hi_it) {
    throw DegenerateFitError("fit_em: all samples identical");
  }

  // Working component order is unlabeled; relabeled by mean at the end.
  double w[2], mu[2], var[2];
  if (config.warm_start) {
    const MixtureParams& p = *config.warm_start;
    validate(p);
    w[0] = p.weight_u; w[1] = p.weight_c;
    mu[0] = p.mean_u;  mu[1] = p.mean_c;
    var[0] = std::max(p.var_u, config.variance_floor);
    var[1] = std::max(p.var_c, config.variance_floor);
  } else {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    double pooled = 0.0;
    for (double x : samples) pooled += (x - mean) * (x - mean);
    pooled /= static_cast<double>(n);
    pooled = std::max(pooled, config.variance_floor);

    mu[0] = sorted_quantile(sorted, 0.25);
    mu[1] = sorted_quantile(sorted, 0.75);
    if (mu[0] == mu[1]) {  // heavy ties; spread to the sample extremes
      mu[0] = *lo_it;
      mu[1] = *hi_it;
    }
    w[0] = w[1] = 0.5;
    var[0] = var[1] = pooled;
  }

  FitResult result;
  std::vector<double> resp(n);  // responsibility of component 1

  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    // E-step; also accumulates the log-likelihood at the current parameters.
    const double lw0 = std::log(w[0]);
    const double lw1 = std::log(w[1]);
    double loglik = 0.0;
    double s1 = 0.0, sx0 = 0.0, sx1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = lw0 + log_gaussian_pdf(samples[i], mu[0], var[0]);
      const double b = lw1 + log_gaussian_pdf(samples[i], mu[1], var[1]);
      loglik += log_add_exp(a, b);
      // r1 = exp(b) / (exp(a) + exp(b)) via a stable sigmoid
      const double r1 = (b >= a) ? 1.0 / (1.0 + std::exp(a - b))
                                 : std::exp(b - a) / (1.0 + std::exp(b - a));
      resp[i] = r1;
      s1 += r1;
      sx0 += (1.0 - r1) * samples[i];
      sx1 += r1 * samples[i];
    }
    result.loglik_trajectory.push_back(loglik);
    result.iterations = it + 1;

    if (it > 0) {
      const double prev = result.loglik_trajectory[it - 1];
      if (loglik - prev < config.loglik_tolerance) {
        result.converged = true;
        break;
      }
    }

    // M-step. Weights renormalize exactly; variances are floored here so a
    // component cannot collapse onto a single point mid-run.
    const double s0 = static_cast<double>(n) - s1;
    if (s0 > 0.0) mu[0] = sx0 / s0;
    if (s1 > 0.0) mu[1] = sx1 / s1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d0 = samples[i] - mu[0];
      const double d1 = samples[i] - mu[1];
      v0 += (1.0 - resp[i]) * d0 * d0;
      v1 += resp[i] * d1 * d1;
    }
    if (s0 > 0.0) var[0] = std::max(v0 / s0, config.variance_floor);
    if (s1 > 0.0) var[1] = std::max(v1 / s1, config.variance_floor);
    w[1] = s1 / static_cast<double>(n);
    w[0] = 1.0 - w[1];
  }

  const int u = (mu[0] <= mu[1]) ? 0 : 1;
  const int c = 1 - u;
  MixtureParams params;
  params.weight_u = w[u];
  params.weight_c = w[c];
  params.mean_u = mu[u];
  params.mean_c = mu[c];
  params.var_u = var[u];
  params.var_c = var[c];
  params.weak_separation = (params.mean_c - params.mean_u) < kMeanGapCollapse ||
                           std::min(params.weight_c, params.weight_u) < kWeightCollapse;
  result.params = params;
  return result;
}

double log_likelihood(std::span<const double> samples, const MixtureParams& params) {
  if (samples.empty()) throw InvalidInputError("log_likelihood: no samples");
  validate(params);
  const double lwc = std::log(params.weight_c);
  const double lwu = std::log(params.weight_u);
  double total = 0.0;
  for (double x : samples) {
    total += log_add_exp(lwc + log_gaussian_pdf(x, params.mean_c, params.var_c),
                         lwu + log_gaussian_pdf(x, params.mean_u, params.var_u));
  }
  return total;
}

double posterior_confident(double phi, const MixtureParams& params) {
  validate(params);
  if (!std::isfinite(phi)) throw InvalidInputError("posterior_confident: non-finite phi");
  const double a = std::log(params.weight_c) + log_gaussian_pdf(phi, params.mean_c, params.var_c);
  const double b = std::log(params.weight_u) + log_gaussian_pdf(phi, params.mean_u, params.var_u);
  // posterior = exp(a) / (exp(a) + exp(b)), stabilized
  double p;
  if (a >= b) {
    p = 1.0 / (1.0 + std::exp(b - a));
  } else {
    const double e = std::exp(a - b);
    p = e / (1.0 + e);
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace steer::mixture

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace steer {

// Precondition violations: empty inputs, non-finite values, out-of-range parameters.
class InvalidInputError : public std::runtime_error {
 public:
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Mixture fitting was asked for with fewer samples than EmConfig::min_samples.
class InsufficientDataError : public std::runtime_error {
 public:
  explicit InsufficientDataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Sample set has zero spread; a two-component Gaussian fit is undefined.
class DegenerateFitError : public std::runtime_error {
 public:
  explicit DegenerateFitError(const std::string& msg) : std::runtime_error(msg) {}
};

// A backend failed to produce a step (transport error, exhausted script,
// missing logprobs, ...). The engine fails the trace, not the run.
class GeneratorError : public std::runtime_error {
 public:
  explicit GeneratorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Run configuration does not validate. CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace steer

// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steer/engine.hpp"
#include "steer/generators.hpp"

namespace steer::config {

enum class RunMode { steer, always_small, always_large, percentile, sweep };

std::string_view to_string(RunMode m);
RunMode run_mode_from_string(std::string_view s);

// Fully-resolved run configuration. Parsed from a flat file of dotted keys
// (`engine.gamma = 0.5`); unknown keys are errors, not warnings, and every
// applied default is echoed on the diagnostics channel.
struct RunConfig {
  RunMode mode = RunMode::steer;
  engine::EngineConfig engine;
  double percentile_p = 50.0;        // percentile mode only
  std::vector<double> sweep_gammas;  // sweep mode; defaults to 0.0 .. 0.9
  generators::GeneratorSpec small;
  generators::GeneratorSpec large;
  std::string scenario_path;   // exactly one of scenario/questions
  std::string questions_path;
  std::string output_dir = "steer-out";

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
};

// Flag overrides; they win over file values and are recorded as such.
struct Overrides {
  std::optional<std::string> mode;
  std::optional<double> gamma;
  std::optional<std::int64_t> seed;
  std::optional<std::string> output_dir;
};

struct LoadedConfig {
  RunConfig config;
  std::vector<std::string> diagnostics;  // applied defaults and overrides
};

/// Parse and fully resolve a config file, applying defaults and overrides.
/// Throws ConfigError with a diagnostic naming the offending key.
LoadedConfig validate_config(const std::string& path, const Overrides& overrides = {});

/// Same, from config text (for tests).
LoadedConfig parse_config_text(const std::string& text, const Overrides& overrides = {});

}  // namespace steer::config

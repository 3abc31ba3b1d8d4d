// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace steer::cli {

// Exit codes: 0 success, 1 config error, 2 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 1;
inline constexpr int kExitRuntimeError = 2;

/// Full CLI entry point (flags: --config, --mode, --gamma, --seed,
/// --output-dir). Exposed as a library call so tests can drive it in-process.
int run_from_args(const std::vector<std::string>& args);

int run_main(int argc, char** argv);

}  // namespace steer::cli

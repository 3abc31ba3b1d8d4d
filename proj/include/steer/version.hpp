// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string_view>

namespace steer {

inline constexpr std::string_view kVersion = "steer 1.0.0";

}  // namespace steer

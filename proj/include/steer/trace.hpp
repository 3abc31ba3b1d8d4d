// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "steer/confidence.hpp"
#include "steer/routing.hpp"

namespace steer {

// failed is reached only through the generator-failure policy: the trace is
// abandoned but its spent cost stays in the ledger.
enum class TraceStatus { ongoing, complete_eos, complete_max_steps, failed };

std::string_view to_string(TraceStatus s);
TraceStatus trace_status_from_string(std::string_view s);

// One reasoning step. text never contains the step separator; refined marks
// the step-0 regeneration by the large model and can only appear at index 0.
struct StepRecord {
  std::size_t index = 0;
  std::string text;
  routing::ModelChoice model = routing::ModelChoice::small;
  confidence::StepConfidence confidence;
  std::size_t token_count = 0;
  bool refined = false;
  bool eos = false;  // generator signaled end-of-sequence on this step
};

// One question's evolving solution. current_model is the model the next step
// would use; for step i+1 it always equals the routing decision computed from
// step i's confidence.
struct Trace {
  std::string question_id;
  std::string prompt;
  std::vector<StepRecord> steps;
  TraceStatus status = TraceStatus::ongoing;
  routing::ModelChoice current_model = routing::ModelChoice::small;
};

}  // namespace steer

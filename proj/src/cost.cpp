// SPDX-License-Identifier: Apache-2.0

#include "steer/cost.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "steer/errors.hpp"

namespace steer::cost {

double flops_for(std::uint64_t param_count, std::uint64_t tokens) {
  return 2.0 * static_cast<double>(param_count) * static_cast<double>(tokens) / 1e12;
}

double accuracy_per_flops(double accuracy, double avg_flops) {
  if (!(avg_flops > 0.0)) {
    throw InvalidInputError("accuracy_per_flops: avg_flops must be positive");
  }
  return accuracy / avg_flops;
}

namespace {

void accumulate_usage(UsageProfile& profile, const Trace& trace) {
  const auto total = trace.steps.size();
  for (const auto& step : trace.steps) {
    const double rel = static_cast<double>(step.index + 1) / static_cast<double>(total);
    auto bin = static_cast<std::size_t>(std::ceil(rel * 10.0)) - 1;
    bin = std::min<std::size_t>(bin, 9);
    profile.total_steps[bin] += 1;
    if (step.model == routing::ModelChoice::large) profile.large_steps[bin] += 1;
  }
}

}  // namespace

UsageProfile usage_profile(const std::vector<Trace>& traces) {
  if (traces.empty()) throw InvalidInputError("usage_profile: no traces");
  UsageProfile profile;
  for (const auto& trace : traces) accumulate_usage(profile, trace);
  return profile;
}

void CostLedger::add_generated(const std::string& model, std::uint64_t tokens) {
  models[model].generated_tokens += tokens;
}

void CostLedger::add_prompt(const std::string& model, std::uint64_t tokens) {
  models[model].prompt_tokens += tokens;
}

void CostLedger::note_confidence_source(const std::string& model, std::string_view source) {
  auto& slot = models[model].confidence_source;
  if (slot.empty()) {
    slot = source;
  } else if (slot != source) {
    slot = "mixed";
  }
}

void CostLedger::finalize(const std::vector<Trace>& traces) {
  total_flops = 0.0;
  for (auto& [name, totals] : models) {
    totals.flops = flops_for(totals.param_count, totals.generated_tokens);
    total_flops += totals.flops;
  }

  questions = per_trace.size();
  completed = 0;
  failed = 0;
  std::size_t labeled = 0, correct_count = 0;
  for (const auto& record : per_trace) {
    if (record.status == TraceStatus::failed) {
      ++failed;
    } else if (record.status != TraceStatus::ongoing) {
      ++completed;
    }
    if (record.correct.has_value()) {
      ++labeled;
      if (*record.correct) ++correct_count;
    }
  }

  // A run with any labels grades every question; failed/unlabeled traces
  // count as incorrect.
  if (labeled > 0 && questions > 0) {
    accuracy = 100.0 * static_cast<double>(correct_count) / static_cast<double>(questions);
  } else {
    accuracy.reset();
  }

  avg_flops = questions > 0 ? total_flops / static_cast<double>(questions) : 0.0;
  a_per_f.reset();
  if (accuracy && avg_flops > 0.0) {
    a_per_f = accuracy_per_flops(*accuracy, avg_flops);
  }

  usage = UsageProfile{};
  usage_correct.reset();
  usage_incorrect.reset();
  std::uint64_t all_steps = 0, all_large = 0;
  if (!traces.empty()) {
    usage = usage_profile(traces);
    for (std::size_t b = 0; b < 10; ++b) {
      all_steps += usage.total_steps[b];
      all_large += usage.large_steps[b];
    }
    if (labeled > 0) {
      std::set<std::string> correct_ids;
      for (const auto& record : per_trace) {
        if (record.correct.value_or(false)) correct_ids.insert(record.trace_id);
      }
      UsageProfile yes, no;
      for (const auto& trace : traces) {
        accumulate_usage(correct_ids.count(trace.question_id) ? yes : no, trace);
      }
      usage_correct = yes;
      usage_incorrect = no;
    }
  }
  large_usage_rate =
      all_steps == 0 ? 0.0 : static_cast<double>(all_large) / static_cast<double>(all_steps);
}

void CostLedger::absorb(const CostLedger& other) {
  for (const auto& [name, totals] : other.models) {
    auto& mine = models[name];
    mine.param_count = totals.param_count;
    mine.generated_tokens += totals.generated_tokens;
    mine.prompt_tokens += totals.prompt_tokens;
    if (!totals.confidence_source.empty()) {
      note_confidence_source(name, totals.confidence_source);
    }
  }
  per_trace.insert(per_trace.end(), other.per_trace.begin(), other.per_trace.end());
}

}  // namespace steer::cost

// SPDX-License-Identifier: Apache-2.0

#include "steer/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "steer/errors.hpp"
#include "steer/routing.hpp"
#include "steer/version.hpp"

namespace steer::report {

using nlohmann::json;

namespace {

json step_to_json(const StepRecord& step) {
  return json{{"index", step.index},
              {"text", step.text},
              {"model", std::string(routing::to_string(step.model))},
              {"refined", step.refined},
              {"eos", step.eos},
              {"token_count", step.token_count},
              {"confidence",
               {{"value", step.confidence.value},
                {"metric", std::string(confidence::to_string(step.confidence.metric))},
                {"aggregation", std::string(confidence::to_string(step.confidence.aggregation))},
                {"token_count", step.confidence.token_count}}}};
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write artifact: " + path);
  out << j.dump(2) << "\n";
}

json usage_to_json(const cost::UsageProfile& usage) {
  json bins = json::array();
  for (std::size_t b = 0; b < 10; ++b) {
    bins.push_back({{"upper_edge", static_cast<double>(b + 1) / 10.0},
                    {"large_steps", usage.large_steps[b]},
                    {"total_steps", usage.total_steps[b]},
                    {"ratio", usage.ratio(b)}});
  }
  return bins;
}

}  // namespace

json traces_to_json(const std::vector<Trace>& traces) {
  json arr = json::array();
  for (const auto& trace : traces) {
    json steps = json::array();
    for (const auto& step : trace.steps) steps.push_back(step_to_json(step));
    arr.push_back({{"question_id", trace.question_id},
                   {"prompt", trace.prompt},
                   {"status", std::string(to_string(trace.status))},
                   {"current_model", std::string(routing::to_string(trace.current_model))},
                   {"steps", std::move(steps)}});
  }
  return arr;
}

json ledger_to_json(const cost::CostLedger& ledger) {
  json models;
  for (const auto& [name, totals] : ledger.models) {
    models[name] = {{"param_count", totals.param_count},
                    {"generated_tokens", totals.generated_tokens},
                    {"prompt_tokens", totals.prompt_tokens},
                    {"flops_e12", totals.flops},
                    {"confidence_source", totals.confidence_source}};
  }
  json per_trace = json::array();
  for (const auto& record : ledger.per_trace) {
    json r = {{"trace_id", record.trace_id},
              {"tokens_small", record.tokens_small},
              {"tokens_large", record.tokens_large},
              {"status", std::string(to_string(record.status))}};
    r["correct"] = record.correct ? json(*record.correct) : json(nullptr);
    per_trace.push_back(std::move(r));
  }
  json summary = {{"questions", ledger.questions},
                  {"completed", ledger.completed},
                  {"failed", ledger.failed},
                  {"total_flops_e12", ledger.total_flops},
                  {"avg_flops_e12", ledger.avg_flops},
                  {"large_usage_rate", ledger.large_usage_rate}};
  summary["accuracy_pct"] = ledger.accuracy ? json(*ledger.accuracy) : json(nullptr);
  summary["a_per_f"] = ledger.a_per_f ? json(*ledger.a_per_f) : json(nullptr);

  json j = {{"models", std::move(models)},
            {"per_trace", std::move(per_trace)},
            {"summary", std::move(summary)},
            {"usage_profile", usage_to_json(ledger.usage)}};
  if (ledger.usage_correct) j["usage_profile_correct"] = usage_to_json(*ledger.usage_correct);
  if (ledger.usage_incorrect) j["usage_profile_incorrect"] = usage_to_json(*ledger.usage_incorrect);
  return j;
}

void write_traces(const std::string& path, const json& run_config,
                  const std::vector<Trace>& traces) {
  write_json_file(path, json{{"version", std::string(kVersion)},
                             {"run_config", run_config},
                             {"written_at_ms", events::now_millis()},
                             {"traces", traces_to_json(traces)}});
}

void write_report(const std::string& path, const json& run_config,
                  const cost::CostLedger& ledger) {
  json j = ledger_to_json(ledger);
  j["version"] = std::string(kVersion);
  j["run_config"] = run_config;
  j["written_at_ms"] = events::now_millis();
  write_json_file(path, j);
}

std::string format_summary(const cost::CostLedger& ledger, const std::string& title) {
  std::ostringstream os;
  os << title << "\n";
  os << std::left << std::setw(10) << "model" << std::right << std::setw(16) << "params"
     << std::setw(14) << "gen_tokens" << std::setw(14) << "prompt_tok" << std::setw(14)
     << "flops(e12)" << "\n";
  for (const auto& [name, totals] : ledger.models) {
    os << std::left << std::setw(10) << name << std::right << std::setw(16) << totals.param_count
       << std::setw(14) << totals.generated_tokens << std::setw(14) << totals.prompt_tokens
       << std::setw(14) << std::fixed << std::setprecision(4) << totals.flops << "\n";
  }
  os << "questions " << ledger.questions << "  completed " << ledger.completed << "  failed "
     << ledger.failed << "\n";
  os << std::fixed << std::setprecision(4);
  os << "avg_flops(e12) " << ledger.avg_flops << "  large_usage " << std::setprecision(3)
     << ledger.large_usage_rate;
  if (ledger.accuracy) {
    os << "  accuracy " << std::setprecision(2) << *ledger.accuracy << "%";
  }
  if (ledger.a_per_f) {
    os << "  a_per_f " << std::setprecision(3) << *ledger.a_per_f;
  }
  os << "\n";
  os << "large-usage by relative step decile:\n ";
  for (std::size_t b = 0; b < 10; ++b) {
    os << std::setw(6) << std::setprecision(1) << static_cast<double>(b + 1) / 10.0;
  }
  os << "\n ";
  for (std::size_t b = 0; b < 10; ++b) {
    os << std::setw(6) << std::setprecision(2) << ledger.usage.ratio(b);
  }
  os << "\n";
  return os.str();
}

std::string format_frontier(const std::vector<FrontierRow>& rows) {
  std::ostringstream os;
  os << std::right << std::setw(8) << "gamma" << std::setw(12) << "accuracy" << std::setw(14)
     << "avg_flops" << std::setw(12) << "a_per_f" << std::setw(12) << "large_use" << "\n";
  for (const auto& row : rows) {
    os << std::fixed << std::setprecision(2) << std::setw(8) << row.gamma;
    if (row.accuracy) {
      os << std::setw(12) << *row.accuracy;
    } else {
      os << std::setw(12) << "-";
    }
    os << std::setw(14) << std::setprecision(4) << row.avg_flops;
    if (row.a_per_f) {
      os << std::setw(12) << std::setprecision(3) << *row.a_per_f;
    } else {
      os << std::setw(12) << "-";
    }
    os << std::setw(12) << std::setprecision(3) << row.large_usage_rate << "\n";
  }
  return os.str();
}

void write_frontier(const std::string& json_path, const std::string& text_path,
                    const json& run_config, const std::vector<FrontierRow>& rows) {
  json arr = json::array();
  for (const auto& row : rows) {
    json r = {{"gamma", row.gamma},
              {"avg_flops_e12", row.avg_flops},
              {"large_usage_rate", row.large_usage_rate}};
    r["accuracy_pct"] = row.accuracy ? json(*row.accuracy) : json(nullptr);
    r["a_per_f"] = row.a_per_f ? json(*row.a_per_f) : json(nullptr);
    arr.push_back(std::move(r));
  }
  write_json_file(json_path, json{{"version", std::string(kVersion)},
                                  {"run_config", run_config},
                                  {"written_at_ms", events::now_millis()},
                                  {"rows", std::move(arr)}});
  std::ofstream out(text_path);
  if (!out) throw InvalidInputError("cannot write artifact: " + text_path);
  out << format_frontier(rows);
}

// ---------------------------------------------------------------------------
// Audit
// ---------------------------------------------------------------------------

namespace {

struct PoolParams {
  std::optional<mixture::MixtureParams> params;
  std::string origin = "none";
};

}  // namespace

AuditResult audit_events(const std::vector<events::Event>& events) {
  AuditResult result;
  auto flag = [&](const std::string& msg) {
    ++result.discrepancies;
    if (result.messages.size() < 32) result.messages.push_back(msg);
  };

  std::string policy_kind = "posterior_threshold";
  double gamma = 0.0;
  double percentile_p = 0.0;

  // State scoped to the current group run; run_start resets it.
  std::map<std::string, PoolParams> pools;                      // pooled/small/large
  std::map<std::string, std::string> last_step_model;           // trace -> model
  std::map<std::string, std::string> pending_decision;          // trace -> model
  std::map<std::string, std::int64_t> pending_step;             // trace -> step index

  // Percentile barriers are validated per contiguous run of route events.
  std::vector<events::Event> percentile_batch;
  auto flush_percentile_batch = [&]() {
    if (percentile_batch.empty()) return;
    std::vector<routing::ConfidencePoint> points;
    for (const auto& e : percentile_batch) points.push_back({*e.trace_id, *e.phi});
    const auto partition = routing::percentile_route(points, percentile_p);
    std::map<std::string, std::string> expected;
    for (const auto& id : partition.small_ids) expected[id] = "small";
    for (const auto& id : partition.large_ids) expected[id] = "large";
    for (const auto& e : percentile_batch) {
      ++result.route_checks;
      if (expected.at(*e.trace_id) != *e.model) {
        flag("percentile route mismatch for " + *e.trace_id + " at step " +
             std::to_string(*e.step_index));
      }
    }
    percentile_batch.clear();
  };

  for (const auto& e : events) {
    if (e.event != "route_decided") flush_percentile_batch();

    if (e.event == "run_start") {
      const auto& policy = e.params.at("policy");
      policy_kind = policy.at("kind").get<std::string>();
      gamma = policy.value("gamma", 0.0);
      percentile_p = policy.value("percentile_p", 0.0);
      pools.clear();
      last_step_model.clear();
      pending_decision.clear();
      pending_step.clear();
    } else if (e.event == "fit_computed") {
      PoolParams pool;
      pool.origin = e.params.value("origin", "none");
      if (pool.origin != "none") pool.params = events::params_from_json(e.params);
      pools[e.model.value_or("pooled")] = std::move(pool);
    } else if (e.event == "route_decided") {
      if (policy_kind == "percentile") {
        percentile_batch.push_back(e);
      } else {
        ++result.route_checks;
        const std::string pool_key =
            pools.count("pooled") ? "pooled" : last_step_model[*e.trace_id];
        const auto& pool = pools[pool_key];
        std::string expected = "small";
        if (pool.params && !pool.params->weak_separation) {
          const double posterior = mixture::posterior_confident(*e.phi, *pool.params);
          expected = std::string(
              routing::to_string(routing::decide(posterior, gamma)));
          if (e.posterior && std::abs(*e.posterior - posterior) > 1e-9) {
            flag("posterior mismatch for " + *e.trace_id + " at step " +
                 std::to_string(*e.step_index));
          }
        }
        if (expected != *e.model) {
          flag("route mismatch for " + *e.trace_id + " at step " + std::to_string(*e.step_index) +
               ": engine=" + *e.model + " audit=" + expected);
        }
      }
      pending_decision[*e.trace_id] = *e.model;
      pending_step[*e.trace_id] = *e.step_index;
    } else if (e.event == "step_generated") {
      // A routed step must be generated by the routed model. Step 0 initial
      // generation has no route; a step-0 route to small keeps the original.
      auto it = pending_decision.find(*e.trace_id);
      if (it != pending_decision.end() && pending_step[*e.trace_id] == *e.step_index) {
        ++result.step_checks;
        const bool step0_small_keep = *e.step_index == 0 && it->second == "small";
        if (!step0_small_keep && it->second != *e.model) {
          flag("generated model mismatch for " + *e.trace_id + " at step " +
               std::to_string(*e.step_index) + ": routed=" + it->second +
               " generated=" + *e.model);
        }
        pending_decision.erase(it);
      }
      last_step_model[*e.trace_id] = *e.model;
    }
  }
  flush_percentile_batch();
  return result;
}

AuditResult audit_event_log(const std::string& path) {
  return audit_events(events::read_event_log(path));
}

}  // namespace steer::report

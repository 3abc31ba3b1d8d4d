// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steer/cost.hpp"
#include "steer/event_log.hpp"
#include "steer/trace.hpp"

namespace steer::report {

// Every artifact embeds the resolved run config and the code version so any
// run is self-describing; timestamps live in one dedicated field.
nlohmann::json traces_to_json(const std::vector<Trace>& traces);
nlohmann::json ledger_to_json(const cost::CostLedger& ledger);

void write_traces(const std::string& path, const nlohmann::json& run_config,
                  const std::vector<Trace>& traces);
void write_report(const std::string& path, const nlohmann::json& run_config,
                  const cost::CostLedger& ledger);

/// Fixed-width human summary of one run.
std::string format_summary(const cost::CostLedger& ledger, const std::string& title);

struct FrontierRow {
  double gamma = 0.0;
  std::optional<double> accuracy;  // percent
  double avg_flops = 0.0;
  std::optional<double> a_per_f;
  double large_usage_rate = 0.0;
};

void write_frontier(const std::string& json_path, const std::string& text_path,
                    const nlohmann::json& run_config, const std::vector<FrontierRow>& rows);
std::string format_frontier(const std::vector<FrontierRow>& rows);

// ---------------------------------------------------------------------------
// Event-log audit: independently re-derive every routing decision from the
// recorded phi, params, and threshold, and compare against what the engine
// actually did.
// ---------------------------------------------------------------------------

struct AuditResult {
  std::size_t route_checks = 0;
  std::size_t step_checks = 0;
  std::size_t discrepancies = 0;
  std::vector<std::string> messages;

  bool clean() const { return discrepancies == 0; }
};

AuditResult audit_events(const std::vector<events::Event>& events);
AuditResult audit_event_log(const std::string& path);

}  // namespace steer::report

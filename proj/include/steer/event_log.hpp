// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "steer/mixture.hpp"
#include "steer/routing.hpp"

namespace steer::events {

// How the params attached to a fit event came to be: a fresh EM fit, a stale
// fit reused because the barrier had too few samples, or nothing available
// (route-all-small fallback).
enum class ParamsOrigin { fit, reused, none };

std::string_view to_string(ParamsOrigin o);

// One record of the append-only run log. Every record serializes the same
// eight fields (event, step_index, trace_id, model, phi, posterior, params,
// timestamp); fields that do not apply are null. Event names: run_start,
// step_generated, fit_computed, route_decided, trace_completed, trace_failed.
struct Event {
  std::string event;
  std::optional<std::int64_t> step_index;
  std::optional<std::string> trace_id;
  std::optional<std::string> model;
  std::optional<double> phi;
  std::optional<double> posterior;
  nlohmann::json params;  // null unless the event carries parameters
  std::int64_t timestamp = 0;

  nlohmann::json to_json() const;
  static Event from_json(const nlohmann::json& j);
};

nlohmann::json params_to_json(const mixture::MixtureParams& params, ParamsOrigin origin);
mixture::MixtureParams params_from_json(const nlohmann::json& j);

// Append-only sink. The file variant writes one JSON record per line; the
// memory variant backs tests and the in-process auditor.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void append(const Event& event) = 0;
};

class NullSink : public EventSink {
 public:
  void append(const Event&) override {}
};

class MemorySink : public EventSink {
 public:
  void append(const Event& event) override { events_.push_back(event); }
  const std::vector<Event>& events() const { return events_; }

 private:
  std::vector<Event> events_;
};

class FileSink : public EventSink {
 public:
  explicit FileSink(const std::string& path);
  void append(const Event& event) override;

 private:
  std::ofstream out_;
};

// Tee to several sinks (e.g. file + in-memory audit).
class MultiSink : public EventSink {
 public:
  void add(EventSink* sink) { sinks_.push_back(sink); }
  void append(const Event& event) override {
    for (auto* s : sinks_) s->append(event);
  }

 private:
  std::vector<EventSink*> sinks_;
};

std::vector<Event> read_event_log(const std::string& path);

std::int64_t now_millis();

}  // namespace steer::events

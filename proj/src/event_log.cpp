// SPDX-License-Identifier: Apache-2.0

#include "steer/event_log.hpp"

#include <chrono>

#include "steer/errors.hpp"

namespace steer::events {

using nlohmann::json;

std::string_view to_string(ParamsOrigin o) {
  switch (o) {
    case ParamsOrigin::fit: return "fit";
    case ParamsOrigin::reused: return "reused";
    case ParamsOrigin::none: return "none";
  }
  return "?";
}

json Event::to_json() const {
  json j;
  j["event"] = event;
  j["step_index"] = step_index ? json(*step_index) : json(nullptr);
  j["trace_id"] = trace_id ? json(*trace_id) : json(nullptr);
  j["model"] = model ? json(*model) : json(nullptr);
  j["phi"] = phi ? json(*phi) : json(nullptr);
  j["posterior"] = posterior ? json(*posterior) : json(nullptr);
  j["params"] = params;
  j["timestamp"] = timestamp;
  return j;
}

Event Event::from_json(const json& j) {
  Event e;
  e.event = j.at("event").get<std::string>();
  if (!j.at("step_index").is_null()) e.step_index = j["step_index"].get<std::int64_t>();
  if (!j.at("trace_id").is_null()) e.trace_id = j["trace_id"].get<std::string>();
  if (!j.at("model").is_null()) e.model = j["model"].get<std::string>();
  if (!j.at("phi").is_null()) e.phi = j["phi"].get<double>();
  if (!j.at("posterior").is_null()) e.posterior = j["posterior"].get<double>();
  e.params = j.at("params");
  e.timestamp = j.at("timestamp").get<std::int64_t>();
  return e;
}

json params_to_json(const mixture::MixtureParams& params, ParamsOrigin origin) {
  return json{{"weight_c", params.weight_c}, {"weight_u", params.weight_u},
              {"mean_c", params.mean_c},     {"mean_u", params.mean_u},
              {"var_c", params.var_c},       {"var_u", params.var_u},
              {"weak_separation", params.weak_separation},
              {"origin", std::string(to_string(origin))}};
}

mixture::MixtureParams params_from_json(const json& j) {
  mixture::MixtureParams p;
  p.weight_c = j.at("weight_c").get<double>();
  p.weight_u = j.at("weight_u").get<double>();
  p.mean_c = j.at("mean_c").get<double>();
  p.mean_u = j.at("mean_u").get<double>();
  p.var_c = j.at("var_c").get<double>();
  p.var_u = j.at("var_u").get<double>();
  p.weak_separation = j.value("weak_separation", false);
  return p;
}

FileSink::FileSink(const std::string& path) : out_(path, std::ios::trunc) {
  if (!out_) throw InvalidInputError("cannot open event log for writing: " + path);
}

void FileSink::append(const Event& event) {
  out_ << event.to_json().dump() << "\n";
  out_.flush();
}

std::vector<Event> read_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open event log: " + path);
  std::vector<Event> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(Event::from_json(json::parse(line)));
  }
  return events;
}

std::int64_t now_millis() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace steer::events

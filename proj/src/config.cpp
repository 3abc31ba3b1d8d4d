// SPDX-License-Identifier: Apache-2.0

#include "steer/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "steer/errors.hpp"

namespace steer::config {

using nlohmann::json;

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::steer: return "steer";
    case RunMode::always_small: return "always_small";
    case RunMode::always_large: return "always_large";
    case RunMode::percentile: return "percentile";
    case RunMode::sweep: return "sweep";
  }
  return "?";
}

RunMode run_mode_from_string(std::string_view s) {
  if (s == "steer") return RunMode::steer;
  if (s == "always_small") return RunMode::always_small;
  if (s == "always_large") return RunMode::always_large;
  if (s == "percentile") return RunMode::percentile;
  if (s == "sweep") return RunMode::sweep;
  throw ConfigError("unknown mode: " + std::string(s));
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Values may use \n / \t / \\ escapes (needed for stop sequences).
std::string unescape(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char c = s[++i];
      if (c == 'n') out += '\n';
      else if (c == 't') out += '\t';
      else if (c == '\\') out += '\\';
      else { out += '\\'; out += c; }
    } else {
      out += s[i];
    }
  }
  return out;
}

class KeyedValues {
 public:
  explicit KeyedValues(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      }
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty()) {
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      }
      if (values_.count(key)) throw ConfigError("duplicate config key: " + key);
      values_[key] = value;
    }
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    consumed_.insert(key);
    return it->second;
  }

  void ensure_fully_consumed() const {
    for (const auto& [key, value] : values_) {
      if (!consumed_.count(key)) throw ConfigError("unknown config key: " + key);
    }
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> consumed_;
};

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: " + value);
  }
}

std::int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not an integer: " + value);
  }
}

std::uint64_t parse_positive(const std::string& key, const std::string& value) {
  const std::int64_t v = parse_int(key, value);
  if (v <= 0) throw ConfigError("config key " + key + ": must be positive");
  return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key " + key + ": not a boolean: " + value);
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double(key, item));
  }
  return out;
}

// One resolver per key keeps apply-or-default and echoing uniform.
class Resolver {
 public:
  Resolver(KeyedValues& values, std::vector<std::string>& diagnostics)
      : values_(values), diagnostics_(diagnostics) {}

  template <typename T, typename ParseFn, typename ShowFn>
  void field(const std::string& key, T& slot, ParseFn&& parse, ShowFn&& show) {
    if (auto raw = values_.take(key)) {
      slot = parse(key, *raw);
    } else {
      diagnostics_.push_back("default applied: " + key + " = " + show(slot));
    }
  }

  void number(const std::string& key, double& slot) {
    field(key, slot, parse_double, [](double v) {
      std::ostringstream os;
      os << v;
      return os.str();
    });
  }

  void integer(const std::string& key, std::int64_t& slot) {
    field(key, slot, parse_int, [](std::int64_t v) { return std::to_string(v); });
  }

  template <typename T>
  void positive(const std::string& key, T& slot) {
    field(
        key, slot,
        [](const std::string& k, const std::string& v) { return static_cast<T>(parse_positive(k, v)); },
        [](T v) { return std::to_string(v); });
  }

  void boolean(const std::string& key, bool& slot) {
    field(key, slot, parse_bool, [](bool v) { return std::string(v ? "true" : "false"); });
  }

  void text(const std::string& key, std::string& slot, bool escape = false) {
    field(
        key, slot,
        [escape](const std::string&, const std::string& v) { return escape ? unescape(v) : v; },
        [](const std::string& v) {
          std::string shown = v;
          std::size_t pos = 0;
          while ((pos = shown.find('\n', pos)) != std::string::npos) {
            shown.replace(pos, 1, "\\n");
            pos += 2;
          }
          return shown.empty() ? std::string("(empty)") : shown;
        });
  }

 private:
  KeyedValues& values_;
  std::vector<std::string>& diagnostics_;
};

void resolve_generator(Resolver& r, KeyedValues& values, const std::string& prefix,
                       generators::GeneratorSpec& spec) {
  r.text(prefix + ".name", spec.name);
  r.positive(prefix + ".param_count", spec.param_count);
  std::string backend(generators::to_string(spec.backend));
  r.text(prefix + ".backend", backend);
  spec.backend = generators::backend_from_string(backend);
  r.text(prefix + ".endpoint", spec.endpoint);
  r.number(prefix + ".temperature", spec.temperature);
  r.text(prefix + ".stop_sequence", spec.stop_sequence, /*escape=*/true);
  r.positive(prefix + ".max_tokens_per_step", spec.max_tokens_per_step);
  r.positive(prefix + ".max_in_flight", spec.max_in_flight);
  (void)values;
}

}  // namespace

void RunConfig::validate() const {
  engine.validate();
  small.validate();
  large.validate();
  if (small.name == large.name) throw ConfigError("generators must have distinct names");
  if (!(percentile_p >= 0.0 && percentile_p <= 100.0)) {
    throw ConfigError("config key percentile_p: outside [0,100]");
  }
  if (mode == RunMode::sweep) {
    if (sweep_gammas.empty()) throw ConfigError("config key sweep.gammas: required in sweep mode");
    for (double g : sweep_gammas) {
      if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("config key sweep.gammas: value outside [0,1]");
    }
  }
  const bool has_scenario = !scenario_path.empty();
  const bool has_questions = !questions_path.empty();
  if (has_scenario == has_questions) {
    throw ConfigError("exactly one of 'scenario' and 'questions' must be set");
  }
  if (has_scenario &&
      (small.backend != generators::Backend::scripted || large.backend != generators::Backend::scripted)) {
    throw ConfigError("scenario input requires scripted backends");
  }
  if (has_questions &&
      (small.backend != generators::Backend::http || large.backend != generators::Backend::http)) {
    throw ConfigError("questions input requires http backends");
  }
  if ((small.backend == generators::Backend::http || large.backend == generators::Backend::http) &&
      engine.metric == confidence::Metric::entropy) {
    throw ConfigError(
        "config key engine.metric: entropy is not derivable from top-1 logprobs over http");
  }
  if (output_dir.empty()) throw ConfigError("config key output_dir: must not be empty");
}

json RunConfig::to_json() const {
  json j;
  j["mode"] = std::string(to_string(mode));
  j["scenario"] = scenario_path;
  j["questions"] = questions_path;
  j["output_dir"] = output_dir;
  j["percentile_p"] = percentile_p;
  j["sweep_gammas"] = sweep_gammas;
  j["engine"] = {{"max_steps", engine.max_steps},
                 {"gamma", engine.gamma},
                 {"metric", std::string(confidence::to_string(engine.metric))},
                 {"aggregation", std::string(confidence::to_string(engine.aggregation))},
                 {"group_count", engine.group_count},
                 {"temperature", engine.temperature},
                 {"seed", engine.seed},
                 {"per_model_fit", engine.per_model_fit},
                 {"warm_start", engine.warm_start},
                 {"em",
                  {{"max_iterations", engine.em.max_iterations},
                   {"loglik_tolerance", engine.em.loglik_tolerance},
                   {"variance_floor", engine.em.variance_floor},
                   {"min_samples", engine.em.min_samples}}}};
  auto gen_json = [](const generators::GeneratorSpec& g) {
    return json{{"name", g.name},
                {"param_count", g.param_count},
                {"backend", std::string(generators::to_string(g.backend))},
                {"endpoint", g.endpoint},
                {"temperature", g.temperature},
                {"stop_sequence", g.stop_sequence},
                {"max_tokens_per_step", g.max_tokens_per_step},
                {"max_in_flight", g.max_in_flight}};
  };
  j["generators"] = {{"small", gen_json(small)}, {"large", gen_json(large)}};
  return j;
}

LoadedConfig parse_config_text(const std::string& text, const Overrides& overrides) {
  KeyedValues values(text);
  LoadedConfig loaded;
  RunConfig& cfg = loaded.config;
  Resolver r(values, loaded.diagnostics);

  std::string mode(to_string(cfg.mode));
  r.text("mode", mode);
  cfg.mode = run_mode_from_string(mode);

  r.text("scenario", cfg.scenario_path);
  r.text("questions", cfg.questions_path);
  r.text("output_dir", cfg.output_dir);

  r.positive("engine.max_steps", cfg.engine.max_steps);
  r.number("engine.gamma", cfg.engine.gamma);
  std::string metric(confidence::to_string(cfg.engine.metric));
  r.text("engine.metric", metric);
  cfg.engine.metric = confidence::metric_from_string(metric);
  std::string aggregation(confidence::to_string(cfg.engine.aggregation));
  r.text("engine.aggregation", aggregation);
  cfg.engine.aggregation = confidence::aggregation_from_string(aggregation);
  r.positive("engine.group_count", cfg.engine.group_count);
  r.number("engine.temperature", cfg.engine.temperature);
  r.integer("engine.seed", cfg.engine.seed);
  r.boolean("engine.per_model_fit", cfg.engine.per_model_fit);
  r.boolean("engine.warm_start", cfg.engine.warm_start);
  r.positive("engine.em.max_iterations", cfg.engine.em.max_iterations);
  r.number("engine.em.loglik_tolerance", cfg.engine.em.loglik_tolerance);
  r.number("engine.em.variance_floor", cfg.engine.em.variance_floor);
  r.positive("engine.em.min_samples", cfg.engine.em.min_samples);

  r.number("percentile_p", cfg.percentile_p);

  cfg.sweep_gammas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  if (auto raw = values.take("sweep.gammas")) {
    cfg.sweep_gammas = parse_double_list("sweep.gammas", *raw);
  } else {
    loaded.diagnostics.push_back("default applied: sweep.gammas = 0.0,0.1,...,0.9");
  }

  cfg.small.name = "small";
  cfg.small.param_count = 4'000'000'000ULL;
  cfg.large.name = "large";
  cfg.large.param_count = 12'000'000'000ULL;
  cfg.large.max_in_flight = cfg.small.max_in_flight = 1;
  // Generator temperatures default to the engine-wide setting.
  cfg.small.temperature = cfg.large.temperature = cfg.engine.temperature;
  resolve_generator(r, values, "generators.small", cfg.small);
  resolve_generator(r, values, "generators.large", cfg.large);

  values.ensure_fully_consumed();

  if (overrides.mode) {
    cfg.mode = run_mode_from_string(*overrides.mode);
    loaded.diagnostics.push_back("override: mode = " + *overrides.mode + " (from --mode)");
  }
  if (overrides.gamma) {
    cfg.engine.gamma = *overrides.gamma;
    std::ostringstream os;
    os << "override: engine.gamma = " << *overrides.gamma << " (from --gamma)";
    loaded.diagnostics.push_back(os.str());
  }
  if (overrides.seed) {
    cfg.engine.seed = *overrides.seed;
    loaded.diagnostics.push_back("override: engine.seed = " + std::to_string(*overrides.seed) +
                                 " (from --seed)");
  }
  if (overrides.output_dir) {
    cfg.output_dir = *overrides.output_dir;
    loaded.diagnostics.push_back("override: output_dir = " + *overrides.output_dir +
                                 " (from --output-dir)");
  }

  // Range checks that name the offending key.
  if (!(cfg.engine.gamma >= 0.0 && cfg.engine.gamma <= 1.0)) {
    throw ConfigError("config key engine.gamma: outside [0,1]");
  }
  cfg.validate();
  return loaded;
}

LoadedConfig validate_config(const std::string& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), overrides);
}

}  // namespace steer::config

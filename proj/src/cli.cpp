// SPDX-License-Identifier: Apache-2.0

#include "steer/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "steer/config.hpp"
#include "steer/engine.hpp"
#include "steer/errors.hpp"
#include "steer/http_generator.hpp"
#include "steer/report.hpp"
#include "steer/version.hpp"

namespace steer::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GeneratorSet {
  std::unique_ptr<generators::Generator> small;
  std::unique_ptr<generators::Generator> large;
  // Present for scripted runs; grades traces against ground-truth labels.
  std::optional<generators::ScriptedScenario> grading_script;
};

GeneratorSet build_generators(const config::RunConfig& cfg) {
  GeneratorSet set;
  if (!cfg.scenario_path.empty()) {
    auto pair = generators::load_scenario_pair(cfg.scenario_path);
    set.grading_script = pair.small;
    set.small = std::make_unique<generators::ScriptedGenerator>(cfg.small, std::move(pair.small));
    set.large = std::make_unique<generators::ScriptedGenerator>(cfg.large, std::move(pair.large));
  } else {
    auto small = std::make_unique<generators::HttpGenerator>(cfg.small);
    auto large = std::make_unique<generators::HttpGenerator>(cfg.large);
    // Connectivity must fail before any trace starts.
    small->preflight();
    large->preflight();
    set.small = std::move(small);
    set.large = std::move(large);
  }
  return set;
}

std::vector<engine::Question> load_questions(const config::RunConfig& cfg,
                                             const GeneratorSet& set) {
  if (set.grading_script) {
    return engine::questions_from_scenario(*set.grading_script);
  }
  std::ifstream in(cfg.questions_path);
  if (!in) throw ConfigError("cannot read questions file: " + cfg.questions_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("questions file " + cfg.questions_path + ": " + std::string(e.what()));
  }
  std::vector<engine::Question> questions;
  for (const auto& q : j.at("questions")) {
    questions.push_back({q.at("id").get<std::string>(), q.at("prompt").get<std::string>()});
  }
  if (questions.empty()) throw ConfigError("questions file has no questions");
  return questions;
}

void grade(engine::RunResult& result, const GeneratorSet& set) {
  if (!set.grading_script) return;
  for (auto& record : result.ledger.per_trace) {
    for (const auto& trace : result.traces) {
      if (trace.question_id == record.trace_id) {
        record.correct = generators::evaluate_correctness(*set.grading_script, trace);
        break;
      }
    }
  }
  result.ledger.finalize(result.traces);
}

routing::RoutingPolicy policy_for(const config::RunConfig& cfg, double gamma) {
  routing::RoutingPolicy policy;
  switch (cfg.mode) {
    case config::RunMode::steer:
    case config::RunMode::sweep:
      policy.kind = routing::PolicyKind::posterior_threshold;
      policy.gamma = gamma;
      break;
    case config::RunMode::always_small:
      policy.kind = routing::PolicyKind::always_small;
      break;
    case config::RunMode::always_large:
      policy.kind = routing::PolicyKind::always_large;
      break;
    case config::RunMode::percentile:
      policy.kind = routing::PolicyKind::percentile;
      policy.percentile_p = cfg.percentile_p;
      break;
  }
  return policy;
}

engine::RunResult run_once(const config::RunConfig& cfg, GeneratorSet& set,
                           const std::vector<engine::Question>& questions, double gamma,
                           const fs::path& dir, const json& base_config_json) {
  fs::create_directories(dir);
  events::FileSink sink((dir / "events.jsonl").string());
  const auto policy = policy_for(cfg, gamma);
  // Artifacts must describe the gamma this run actually used (sweep mode
  // iterates over the grid, not the file value).
  json config_json = base_config_json;
  config_json["engine"]["gamma"] = gamma;
  engine::EngineConfig engine_cfg = cfg.engine;
  engine_cfg.gamma = gamma;
  auto result = engine::run_grouped(questions, *set.small, *set.large, engine_cfg, policy, sink);
  grade(result, set);
  report::write_traces((dir / "traces.json").string(), config_json, result.traces);
  report::write_report((dir / "report.json").string(), config_json, result.ledger);
  std::ofstream txt(dir / "report.txt");
  std::ostringstream title;
  title << "run mode=" << config::to_string(cfg.mode);
  if (policy.gamma) title << " gamma=" << *policy.gamma;
  if (policy.percentile_p) title << " p=" << *policy.percentile_p;
  title << " seed=" << cfg.engine.seed << " (" << kVersion << ")";
  const std::string summary = report::format_summary(result.ledger, title.str());
  txt << summary;
  std::cout << summary;
  return result;
}

int run_loaded(const config::LoadedConfig& loaded) {
  const config::RunConfig& cfg = loaded.config;
  for (const auto& line : loaded.diagnostics) std::cerr << line << "\n";

  auto set = build_generators(cfg);
  const auto questions = load_questions(cfg, set);
  if (cfg.engine.group_count > questions.size()) {
    throw ConfigError("config key engine.group_count: exceeds the number of questions");
  }
  const json config_json = cfg.to_json();
  const fs::path out_dir(cfg.output_dir);

  if (cfg.mode != config::RunMode::sweep) {
    run_once(cfg, set, questions, cfg.engine.gamma, out_dir, config_json);
    return kExitOk;
  }

  std::vector<report::FrontierRow> rows;
  for (double gamma : cfg.sweep_gammas) {
    std::ostringstream name;
    name << "sweep_g" << std::fixed << std::setprecision(2) << gamma;
    const auto result = run_once(cfg, set, questions, gamma, out_dir / name.str(), config_json);
    report::FrontierRow row;
    row.gamma = gamma;
    row.accuracy = result.ledger.accuracy;
    row.avg_flops = result.ledger.avg_flops;
    row.a_per_f = result.ledger.a_per_f;
    row.large_usage_rate = result.ledger.large_usage_rate;
    rows.push_back(row);
  }
  fs::create_directories(out_dir);
  report::write_frontier((out_dir / "frontier.json").string(), (out_dir / "frontier.txt").string(),
                         config_json, rows);
  std::cout << report::format_frontier(rows);
  return kExitOk;
}

}  // namespace

int run_from_args(const std::vector<std::string>& args) {
  CLI::App app{"Step-level confidence-routed generation over small/large model pairs"};
  std::string config_path;
  std::string mode_override;
  double gamma_override = -1.0;
  std::int64_t seed_override = 0;
  std::string output_override;

  app.add_option("--config", config_path, "Run configuration file")->required();
  auto* mode_opt = app.add_option("--mode", mode_override,
                                  "Override mode (steer|always_small|always_large|percentile|sweep)");
  auto* gamma_opt = app.add_option("--gamma", gamma_override, "Override engine.gamma");
  auto* seed_opt = app.add_option("--seed", seed_override, "Override engine.seed");
  auto* out_opt = app.add_option("--output-dir", output_override, "Override output_dir");
  app.set_version_flag("--version", std::string(kVersion));

  // CLI11 wants argv-style reversed vector.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    std::cout << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }

  try {
    config::Overrides overrides;
    if (mode_opt->count()) overrides.mode = mode_override;
    if (gamma_opt->count()) overrides.gamma = gamma_override;
    if (seed_opt->count()) overrides.seed = seed_override;
    if (out_opt->count()) overrides.output_dir = output_override;
    const auto loaded = config::validate_config(config_path, overrides);
    return run_loaded(loaded);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

int run_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_from_args(args);
}

}  // namespace steer::cli

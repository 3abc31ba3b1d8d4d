// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "steer/cli.hpp"
#include "steer/config.hpp"
#include "steer/engine.hpp"
#include "steer/generators.hpp"
#include "steer/report.hpp"
#include "steer/version.hpp"

using namespace steer;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("steer_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct CliCapture {
  std::string out, err;
  int rc = 0;
};

// Drive the CLI in-process with stdout/stderr captured.
CliCapture run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  CliCapture cap;
  cap.rc = cli::run_from_args(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  cap.out = out.str();
  cap.err = err.str();
  return cap;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scenario pair on disk: 12 questions, a third of them hard throughout.
void write_scenario(const fs::path& p, std::int64_t seed = 3) {
  std::vector<double> profile;
  for (int i = 0; i < 12; ++i) profile.push_back(i % 3 == 0 ? 1.0 : 0.0);
  const auto pair = generators::synth_scenario_pair(profile, generators::SynthMixtureSpec{}, seed);
  generators::save_scenario_pair(pair, p.string());
}

std::string strip_timestamps(const std::string& text, bool jsonl) {
  // Remove the dedicated timestamp fields so byte comparison ignores them.
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (jsonl) {
      auto j = json::parse(line);
      j.erase("timestamp");
      out += j.dump();
      out += "\n";
    } else {
      out += line;
      out += "\n";
    }
  }
  if (!jsonl) {
    auto j = json::parse(out);
    j.erase("written_at_ms");
    return j.dump();
  }
  return out;
}

}  // namespace

TEST_CASE("cli steer run writes self-describing artifacts") {
  TempDir dir("cli");
  write_scenario(dir.path / "scenario.json");
  write_file(dir.path / "run.conf",
             "mode = steer\n"
             "scenario = " + (dir.path / "scenario.json").string() + "\n"
             "output_dir = " + (dir.path / "out").string() + "\n"
             "engine.gamma = 0.5\n"
             "engine.seed = 11\n");

  const auto cap = run_cli({"--config", (dir.path / "run.conf").string()});
  CHECK(cap.rc == cli::kExitOk);
  // Applied defaults are echoed on the diagnostics channel; the fixed-width
  // summary goes to stdout.
  CHECK(cap.err.find("default applied: engine.max_steps = 64") != std::string::npos);
  CHECK(cap.out.find("questions 12") != std::string::npos);

  for (const auto* name : {"events.jsonl", "traces.json", "report.json", "report.txt"}) {
    CHECK(fs::exists(dir.path / "out" / name));
  }

  const auto report = json::parse(slurp(dir.path / "out" / "report.json"));
  CHECK(report.at("version") == std::string(kVersion));
  CHECK(report.at("run_config").at("engine").at("gamma") == 0.5);
  CHECK(report.at("summary").at("questions") == 12);
  CHECK_FALSE(report.at("summary").at("accuracy_pct").is_null());

  // A/F self-consistency: recomputing from the reported accuracy and FLOPs
  // reproduces the reported A/F to 3 significant figures.
  const double acc = report.at("summary").at("accuracy_pct").get<double>();
  const double avg = report.at("summary").at("avg_flops_e12").get<double>();
  const double af = report.at("summary").at("a_per_f").get<double>();
  const double recomputed = acc / avg;
  CHECK(std::abs(recomputed - af) / af < 5e-3);

  const auto traces = json::parse(slurp(dir.path / "out" / "traces.json"));
  CHECK(traces.at("traces").size() == 12);
  CHECK(traces.at("run_config") == report.at("run_config"));

  // The event log replays cleanly through the auditor.
  const auto audit = report::audit_event_log((dir.path / "out" / "events.jsonl").string());
  CHECK(audit.clean());
  CHECK(audit.route_checks > 0);
}

TEST_CASE("rerunning an identical config yields identical artifacts modulo timestamps") {
  TempDir dir("determinism");
  write_scenario(dir.path / "scenario.json");
  for (const auto* out : {"out1", "out2"}) {
    write_file(dir.path / "run.conf",
               "mode = steer\n"
               "scenario = " + (dir.path / "scenario.json").string() + "\n"
               "output_dir = " + (dir.path / out).string() + "\n"
               "engine.seed = 4\n");
    REQUIRE(run_cli({"--config", (dir.path / "run.conf").string()}).rc == cli::kExitOk);
  }
  // The run_config embeds output_dir, which differs by construction; compare
  // after pointing both at the same value.
  auto normalize = [&](const std::string& text) {
    auto j = json::parse(text);
    j.erase("written_at_ms");
    j["run_config"]["output_dir"] = "X";
    return j.dump();
  };
  CHECK(strip_timestamps(slurp(dir.path / "out1" / "events.jsonl"), true) ==
        strip_timestamps(slurp(dir.path / "out2" / "events.jsonl"), true));
  CHECK(normalize(slurp(dir.path / "out1" / "traces.json")) ==
        normalize(slurp(dir.path / "out2" / "traces.json")));
  CHECK(normalize(slurp(dir.path / "out1" / "report.json")) ==
        normalize(slurp(dir.path / "out2" / "report.json")));
}

TEST_CASE("cli config errors exit 1 and name the problem") {
  TempDir dir("badcfg");
  write_file(dir.path / "bad.conf", "mode = steer\nscenario = s.json\ngama = 0.5\n");
  const auto cap = run_cli({"--config", (dir.path / "bad.conf").string()});
  CHECK(cap.rc == cli::kExitConfigError);
  CHECK(cap.err.find("gama") != std::string::npos);
  CHECK(run_cli({"--config", (dir.path / "missing.conf").string()}).rc == cli::kExitConfigError);
  CHECK(run_cli({}).rc == cli::kExitConfigError);
}

TEST_CASE("cli http connectivity failure exits 2 before any trace starts") {
  TempDir dir("nohttp");
  write_file(dir.path / "q.json", R"({"questions":[{"id":"a","prompt":"p"}]})");
  write_file(dir.path / "run.conf",
             "mode = steer\n"
             "questions = " + (dir.path / "q.json").string() + "\n"
             "output_dir = " + (dir.path / "out").string() + "\n"
             "generators.small.backend = http\n"
             "generators.small.endpoint = http://127.0.0.1:1\n"
             "generators.large.backend = http\n"
             "generators.large.endpoint = http://127.0.0.1:1\n");
  const auto cap = run_cli({"--config", (dir.path / "run.conf").string()});
  CHECK(cap.rc == cli::kExitRuntimeError);
  CHECK_FALSE(fs::exists(dir.path / "out" / "events.jsonl"));
}

TEST_CASE("cli always_small run spends zero large tokens") {
  TempDir dir("small");
  write_scenario(dir.path / "scenario.json");
  write_file(dir.path / "run.conf",
             "mode = always_small\n"
             "scenario = " + (dir.path / "scenario.json").string() + "\n"
             "output_dir = " + (dir.path / "out").string() + "\n");
  REQUIRE(run_cli({"--config", (dir.path / "run.conf").string()}).rc == cli::kExitOk);
  const auto report = json::parse(slurp(dir.path / "out" / "report.json"));
  CHECK(report.at("models").at("large").at("generated_tokens") == 0);
  CHECK(report.at("models").at("small").at("generated_tokens").get<std::uint64_t>() > 0);
}

TEST_CASE("cli percentile run matches percentile_route on the logged confidences") {
  TempDir dir("pct");
  write_scenario(dir.path / "scenario.json");
  write_file(dir.path / "run.conf",
             "mode = percentile\n"
             "percentile_p = 50\n"
             "scenario = " + (dir.path / "scenario.json").string() + "\n"
             "output_dir = " + (dir.path / "out").string() + "\n");
  REQUIRE(run_cli({"--config", (dir.path / "run.conf").string()}).rc == cli::kExitOk);
  // The auditor replays percentile partitions barrier by barrier.
  const auto audit = report::audit_event_log((dir.path / "out" / "events.jsonl").string());
  CHECK(audit.clean());
  CHECK(audit.route_checks > 0);
}

TEST_CASE("cli sweep writes a frontier with one row per gamma") {
  TempDir dir("sweep");
  write_scenario(dir.path / "scenario.json");
  write_file(dir.path / "run.conf",
             "mode = sweep\n"
             "sweep.gammas = 0.0, 0.3, 0.6, 0.9\n"
             "scenario = " + (dir.path / "scenario.json").string() + "\n"
             "output_dir = " + (dir.path / "out").string() + "\n");
  REQUIRE(run_cli({"--config", (dir.path / "run.conf").string()}).rc == cli::kExitOk);

  const auto frontier = json::parse(slurp(dir.path / "out" / "frontier.json"));
  REQUIRE(frontier.at("rows").size() == 4);
  double prev_usage = -1.0;
  for (const auto& row : frontier.at("rows")) {
    const double usage = row.at("large_usage_rate").get<double>();
    CHECK(usage >= prev_usage);
    prev_usage = usage;
  }
  CHECK(fs::exists(dir.path / "out" / "frontier.txt"));
  CHECK(fs::exists(dir.path / "out" / "sweep_g0.30" / "report.json"));
}

TEST_CASE("flag overrides reach the artifacts") {
  TempDir dir("override");
  write_scenario(dir.path / "scenario.json");
  write_file(dir.path / "run.conf",
             "mode = steer\n"
             "engine.gamma = 0.2\n"
             "scenario = " + (dir.path / "scenario.json").string() + "\n"
             "output_dir = " + (dir.path / "out").string() + "\n");
  const auto cap = run_cli({"--config", (dir.path / "run.conf").string(), "--gamma", "0.8",
                            "--output-dir", (dir.path / "redirected").string()});
  REQUIRE(cap.rc == cli::kExitOk);
  CHECK(cap.err.find("override: engine.gamma = 0.8") != std::string::npos);
  const auto report = json::parse(slurp(dir.path / "redirected" / "report.json"));
  CHECK(report.at("run_config").at("engine").at("gamma") == 0.8);
}

TEST_CASE("summary and frontier formatting stay fixed-width") {
  cost::CostLedger ledger;
  ledger.models["small"].param_count = 4'000'000'000ULL;
  ledger.add_generated("small", 100);
  ledger.per_trace.push_back({"a", 100, 0, TraceStatus::complete_eos, true});
  Trace t;
  t.question_id = "a";
  StepRecord s;
  s.index = 0;
  t.steps.push_back(s);
  ledger.finalize({t});
  const auto text = report::format_summary(ledger, "title");
  CHECK(text.find("title") != std::string::npos);
  CHECK(text.find("model") != std::string::npos);
  CHECK(text.find("questions 1") != std::string::npos);

  std::vector<report::FrontierRow> rows{{0.5, 80.0, 2.0, 40.0, 0.25}};
  const auto table = report::format_frontier(rows);
  CHECK(table.find("gamma") != std::string::npos);
  CHECK(table.find("0.50") != std::string::npos);
}

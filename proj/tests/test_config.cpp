// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>

#include "steer/config.hpp"
#include "steer/errors.hpp"

using namespace steer;
using namespace steer::config;

namespace {

const char* kMinimalScripted = R"(
mode = steer
scenario = scenario.json
)";

bool has_diagnostic(const LoadedConfig& loaded, const std::string& needle) {
  return std::any_of(loaded.diagnostics.begin(), loaded.diagnostics.end(),
                     [&](const std::string& d) { return d.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("minimal config resolves with echoed defaults") {
  const auto loaded = parse_config_text(kMinimalScripted);
  CHECK(loaded.config.mode == RunMode::steer);
  CHECK(loaded.config.scenario_path == "scenario.json");
  CHECK(loaded.config.engine.max_steps == 64);
  CHECK(loaded.config.engine.em.max_iterations == 200);
  CHECK(loaded.config.engine.em.loglik_tolerance == 1e-6);
  CHECK(loaded.config.engine.em.variance_floor == 1e-8);
  CHECK(loaded.config.engine.em.min_samples == 4);
  CHECK(loaded.config.engine.temperature == 0.7);
  CHECK(loaded.config.small.stop_sequence == "\n\n");

  CHECK(has_diagnostic(loaded, "default applied: engine.max_steps = 64"));
  CHECK(has_diagnostic(loaded, "default applied: engine.em.loglik_tolerance"));
  CHECK(has_diagnostic(loaded, "default applied: engine.gamma"));
}

TEST_CASE("unknown keys are errors that name the key") {
  const std::string text = std::string(kMinimalScripted) + "gama = 0.5\n";
  CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("gama"), ConfigError);
}

TEST_CASE("range errors name the key") {
  SUBCASE("gamma out of range") {
    const std::string text = std::string(kMinimalScripted) + "engine.gamma = 1.5\n";
    CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("engine.gamma"), ConfigError);
  }
  SUBCASE("negative max_steps") {
    const std::string text = std::string(kMinimalScripted) + "engine.max_steps = -3\n";
    CHECK_THROWS_AS(parse_config_text(text), ConfigError);
  }
  SUBCASE("bad percentile") {
    const std::string text = std::string(kMinimalScripted) + "percentile_p = 150\n";
    CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("percentile_p"), ConfigError);
  }
}

TEST_CASE("exactly one input source") {
  CHECK_THROWS_AS(parse_config_text("mode = steer\n"), ConfigError);
  const std::string both = std::string(kMinimalScripted) + "questions = q.json\n";
  CHECK_THROWS_AS(parse_config_text(both), ConfigError);
}

TEST_CASE("backend and input-source consistency") {
  SUBCASE("questions input needs http backends") {
    CHECK_THROWS_AS(parse_config_text("mode = steer\nquestions = q.json\n"), ConfigError);
  }
  SUBCASE("http config validates") {
    const std::string text =
        "mode = steer\n"
        "questions = q.json\n"
        "generators.small.backend = http\n"
        "generators.small.endpoint = http://127.0.0.1:8000\n"
        "generators.large.backend = http\n"
        "generators.large.endpoint = http://127.0.0.1:8001\n";
    const auto loaded = parse_config_text(text);
    CHECK(loaded.config.small.backend == generators::Backend::http);
  }
  SUBCASE("entropy metric is rejected over http") {
    const std::string text =
        "mode = steer\n"
        "questions = q.json\n"
        "engine.metric = entropy\n"
        "generators.small.backend = http\n"
        "generators.small.endpoint = http://127.0.0.1:8000\n"
        "generators.large.backend = http\n"
        "generators.large.endpoint = http://127.0.0.1:8001\n";
    CHECK_THROWS_WITH_AS(parse_config_text(text), doctest::Contains("entropy"), ConfigError);
  }
}

TEST_CASE("sweep grid parses and validates") {
  const std::string text = std::string(kMinimalScripted) + "sweep.gammas = 0.0, 0.25, 0.5\n";
  auto loaded = parse_config_text(text);
  CHECK(loaded.config.sweep_gammas == std::vector<double>{0.0, 0.25, 0.5});

  const std::string bad = std::string(kMinimalScripted) +
                          "mode = sweep\nsweep.gammas = 0.0, 1.25\n";
  CHECK_THROWS_AS(parse_config_text(bad), ConfigError);
}

TEST_CASE("default sweep grid covers 0.0 through 0.9 with gap 0.1") {
  const auto loaded = parse_config_text(kMinimalScripted);
  REQUIRE(loaded.config.sweep_gammas.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(loaded.config.sweep_gammas[i] == doctest::Approx(0.1 * static_cast<double>(i)));
  }
}

TEST_CASE("flag overrides win over file values and are recorded") {
  Overrides overrides;
  overrides.gamma = 0.7;
  overrides.mode = "percentile";
  overrides.seed = 99;
  overrides.output_dir = "elsewhere";
  const std::string text = std::string(kMinimalScripted) + "engine.gamma = 0.2\n";
  const auto loaded = parse_config_text(text, overrides);
  CHECK(loaded.config.engine.gamma == 0.7);
  CHECK(loaded.config.mode == RunMode::percentile);
  CHECK(loaded.config.engine.seed == 99);
  CHECK(loaded.config.output_dir == "elsewhere");
  CHECK(has_diagnostic(loaded, "override: engine.gamma = 0.7"));
  CHECK(has_diagnostic(loaded, "override: mode = percentile"));
}

TEST_CASE("generator temperature inherits the engine-wide value") {
  const std::string text = std::string(kMinimalScripted) + "engine.temperature = 0.3\n";
  const auto loaded = parse_config_text(text);
  CHECK(loaded.config.small.temperature == 0.3);
  CHECK(loaded.config.large.temperature == 0.3);

  const std::string with_override =
      std::string(kMinimalScripted) +
      "engine.temperature = 0.3\ngenerators.large.temperature = 0.9\n";
  const auto overridden = parse_config_text(with_override);
  CHECK(overridden.config.small.temperature == 0.3);
  CHECK(overridden.config.large.temperature == 0.9);
}

TEST_CASE("stop sequence escapes") {
  const std::string text =
      std::string(kMinimalScripted) + "generators.small.stop_sequence = \\n\\n\n";
  const auto loaded = parse_config_text(text);
  CHECK(loaded.config.small.stop_sequence == "\n\n");
}

TEST_CASE("duplicate keys and malformed lines are rejected") {
  CHECK_THROWS_AS(parse_config_text("mode = steer\nmode = sweep\nscenario = s.json\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("mode steer\n"), ConfigError);
}

TEST_CASE("generator names must differ") {
  const std::string text = std::string(kMinimalScripted) +
                           "generators.small.name = same\ngenerators.large.name = same\n";
  CHECK_THROWS_AS(parse_config_text(text), ConfigError);
}

TEST_CASE("resolved config serializes every field") {
  const auto loaded = parse_config_text(kMinimalScripted);
  const auto j = loaded.config.to_json();
  CHECK(j.at("mode") == "steer");
  CHECK(j.at("engine").at("max_steps") == 64);
  CHECK(j.at("engine").at("em").at("min_samples") == 4);
  CHECK(j.at("generators").at("small").at("param_count") == 4000000000ULL);
  CHECK(j.at("generators").at("large").at("param_count") == 12000000000ULL);
}

// SPDX-License-Identifier: Apache-2.0

#include "steer/generators.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "steer/errors.hpp"

namespace steer::generators {

using nlohmann::json;

std::string_view to_string(Backend b) {
  return b == Backend::scripted ? "scripted" : "http";
}

Backend backend_from_string(std::string_view s) {
  if (s == "scripted") return Backend::scripted;
  if (s == "http") return Backend::http;
  throw InvalidInputError("unknown backend: " + std::string(s));
}

void GeneratorSpec::validate() const {
  if (name.empty()) throw ConfigError("generator spec: name required");
  if (param_count == 0) throw ConfigError("generator spec '" + name + "': param_count must be positive");
  if (backend == Backend::http && endpoint.empty()) {
    throw ConfigError("generator spec '" + name + "': endpoint required for http backend");
  }
  if (backend == Backend::scripted && !endpoint.empty()) {
    throw ConfigError("generator spec '" + name + "': endpoint only valid for http backend");
  }
  if (temperature < 0.0) throw ConfigError("generator spec '" + name + "': negative temperature");
  if (max_tokens_per_step == 0) {
    throw ConfigError("generator spec '" + name + "': max_tokens_per_step must be positive");
  }
}

const ScriptedQuestion* ScriptedScenario::find(const std::string& id) const {
  for (const auto& q : questions) {
    if (q.id == id) return &q;
  }
  return nullptr;
}

void ScriptedScenario::validate() const {
  for (const auto& q : questions) {
    if (q.id.empty()) throw InvalidInputError("scenario: question with empty id");
    if (q.prompt.empty()) throw InvalidInputError("scenario " + q.id + ": empty prompt");
    for (const auto& step : q.steps) {
      const bool has_vectors = !step.logits.empty();
      const bool has_scalars = !step.max_logits.empty();
      if (has_vectors == has_scalars) {
        throw InvalidInputError("scenario " + q.id + ": step needs exactly one of logits/max_logits");
      }
      if (step.text.find(kStepSeparator) != std::string::npos) {
        throw InvalidInputError("scenario " + q.id + ": step text contains the step separator");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// ScriptedGenerator
// ---------------------------------------------------------------------------

ScriptedGenerator::ScriptedGenerator(GeneratorSpec spec, ScriptedScenario scenario)
    : spec_(std::move(spec)), scenario_(std::move(scenario)) {
  spec_.validate();
  scenario_.validate();
}

namespace {

// A scalar script entry fixes the max logit; the runner-up sits a constant
// gap below so max_prob/entropy are well defined.
constexpr double kScalarRunnerUpGap = 5.0;

std::vector<confidence::TokenObservation> tokens_for_step(const ScriptedStep& step) {
  std::vector<confidence::TokenObservation> out;
  // Step text split on spaces provides token strings for the math-token rule.
  std::vector<std::string> words;
  {
    std::istringstream in(step.text);
    std::string w;
    while (in >> w) words.push_back(w);
  }
  const std::size_t count = step.logits.empty() ? step.max_logits.size() : step.logits.size();
  for (std::size_t j = 0; j < count; ++j) {
    confidence::TokenObservation obs;
    if (!step.logits.empty()) {
      obs = confidence::token_confidence(step.logits[j]);
    } else {
      const double s = step.max_logits[j];
      obs = confidence::token_confidence(std::vector<double>{s, s - kScalarRunnerUpGap});
    }
    obs.text = j < words.size() ? words[j] : "";
    out.push_back(std::move(obs));
  }
  return out;
}

}  // namespace

StepGeneration ScriptedGenerator::generate_step(const std::string& prompt) {
  // The engine builds prompts as question.prompt + ("\n\n" + step)*, so the
  // question is recovered by longest-prefix match and the step index by
  // counting separators in the remainder.
  const ScriptedQuestion* best = nullptr;
  for (const auto& q : scenario_.questions) {
    if (prompt.rfind(q.prompt, 0) == 0) {
      if (!best || q.prompt.size() > best->prompt.size()) best = &q;
    }
  }
  if (!best) {
    throw GeneratorError(spec_.name + ": prompt matches no scripted question");
  }

  std::size_t step_index = 0;
  for (std::size_t pos = best->prompt.size();
       (pos = prompt.find(kStepSeparator, pos)) != std::string::npos;
       pos += kStepSeparator.size()) {
    ++step_index;
  }
  if (step_index >= best->steps.size()) {
    throw GeneratorError(spec_.name + ": script exhausted for " + best->id + " at step " +
                         std::to_string(step_index));
  }

  const ScriptedStep& entry = best->steps[step_index];
  StepGeneration out;
  out.text = entry.text;
  out.tokens = tokens_for_step(entry);
  if (out.tokens.empty()) {
    throw GeneratorError(spec_.name + ": scripted step has no tokens");
  }
  out.eos = entry.emit_eos;
  out.prompt_tokens = approx_prompt_tokens(prompt);
  return out;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

ScriptedScenario synth_scenario(const std::vector<double>& difficulty_profile,
                                const SynthMixtureSpec& mixture_spec,
                                std::int64_t seed, const SynthOptions& options) {
  if (difficulty_profile.empty()) throw InvalidInputError("synth_scenario: empty profile");
  if (!(mixture_spec.mu_u < mixture_spec.mu_c)) {
    throw InvalidInputError("synth_scenario: mu_u must be below mu_c");
  }
  if (!(mixture_spec.sigma_u > 0.0) || !(mixture_spec.sigma_c > 0.0)) {
    throw InvalidInputError("synth_scenario: sigmas must be positive");
  }
  if (options.steps_per_question == 0 || options.tokens_per_step == 0) {
    throw InvalidInputError("synth_scenario: steps and tokens per step must be positive");
  }

  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  ScriptedScenario scenario;
  for (std::size_t qi = 0; qi < difficulty_profile.size(); ++qi) {
    const double difficulty = std::clamp(difficulty_profile[qi], 0.0, 1.0);
    ScriptedQuestion q;
    q.id = options.id_prefix + std::to_string(qi);
    q.prompt = "Question " + q.id + ": solve task " + std::to_string(qi) + ".";
    q.difficulty = difficulty;
    q.gold_answer = "answer-" + q.id;
    for (std::size_t si = 0; si < options.steps_per_question; ++si) {
      ScriptedStep step;
      const bool unconfident = coin(rng) < difficulty;
      step.label = unconfident ? StepLabel::unconfident : StepLabel::confident;
      const double mu = unconfident ? mixture_spec.mu_u : mixture_spec.mu_c;
      const double sigma = unconfident ? mixture_spec.sigma_u : mixture_spec.sigma_c;
      for (std::size_t t = 0; t < options.tokens_per_step; ++t) {
        step.max_logits.push_back(mu + sigma * noise(rng));
      }
      step.text = q.id + " step " + std::to_string(si) + " x" + std::to_string(si);
      step.emit_eos = (si + 1 == options.steps_per_question);
      q.steps.push_back(std::move(step));
    }
    scenario.questions.push_back(std::move(q));
  }
  scenario.validate();
  return scenario;
}

ScenarioPair synth_scenario_pair(const std::vector<double>& difficulty_profile,
                                 const SynthMixtureSpec& mixture_spec,
                                 std::int64_t seed, double large_difficulty_scale,
                                 const SynthOptions& options) {
  if (large_difficulty_scale < 0.0 || large_difficulty_scale > 1.0) {
    throw InvalidInputError("synth_scenario_pair: large_difficulty_scale outside [0,1]");
  }
  std::vector<double> large_profile = difficulty_profile;
  for (double& d : large_profile) d *= large_difficulty_scale;

  ScenarioPair pair;
  pair.small = synth_scenario(difficulty_profile, mixture_spec, seed, options);
  pair.large = synth_scenario(large_profile, mixture_spec, seed + 1, options);
  // The scripts must describe the same questions.
  for (std::size_t i = 0; i < pair.small.questions.size(); ++i) {
    pair.large.questions[i].id = pair.small.questions[i].id;
    pair.large.questions[i].prompt = pair.small.questions[i].prompt;
    pair.large.questions[i].gold_answer = pair.small.questions[i].gold_answer;
  }
  return pair;
}

// ---------------------------------------------------------------------------
// Scenario file IO
// ---------------------------------------------------------------------------

namespace {

json step_to_json(const ScriptedStep& step) {
  json j;
  j["text"] = step.text;
  if (!step.logits.empty()) j["logits"] = step.logits;
  if (!step.max_logits.empty()) j["max_logits"] = step.max_logits;
  j["eos"] = step.emit_eos;
  if (step.label) {
    j["label"] = *step.label == StepLabel::unconfident ? "unconfident" : "confident";
  }
  return j;
}

ScriptedStep step_from_json(const json& j) {
  ScriptedStep step;
  step.text = j.at("text").get<std::string>();
  if (j.contains("logits")) step.logits = j["logits"].get<std::vector<std::vector<double>>>();
  if (j.contains("max_logits")) step.max_logits = j["max_logits"].get<std::vector<double>>();
  step.emit_eos = j.value("eos", false);
  if (j.contains("label")) {
    step.label = j["label"].get<std::string>() == "unconfident" ? StepLabel::unconfident
                                                                : StepLabel::confident;
  }
  return step;
}

json scenario_to_json(const ScriptedScenario& scenario) {
  json qs = json::array();
  for (const auto& q : scenario.questions) {
    json jq;
    jq["id"] = q.id;
    jq["prompt"] = q.prompt;
    jq["difficulty"] = q.difficulty;
    jq["gold_answer"] = q.gold_answer;
    json steps = json::array();
    for (const auto& step : q.steps) steps.push_back(step_to_json(step));
    jq["steps"] = std::move(steps);
    qs.push_back(std::move(jq));
  }
  return json{{"questions", std::move(qs)}};
}

ScriptedScenario scenario_from_json(const json& j) {
  ScriptedScenario scenario;
  for (const auto& jq : j.at("questions")) {
    ScriptedQuestion q;
    q.id = jq.at("id").get<std::string>();
    q.prompt = jq.at("prompt").get<std::string>();
    q.difficulty = jq.value("difficulty", 0.0);
    q.gold_answer = jq.value("gold_answer", "");
    for (const auto& js : jq.at("steps")) q.steps.push_back(step_from_json(js));
    scenario.questions.push_back(std::move(q));
  }
  scenario.validate();
  return scenario;
}

}  // namespace

ScenarioPair load_scenario_pair(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInputError("scenario file " + path + ": " + e.what());
  }
  const int version = j.value("schema_version", -1);
  if (version != kScenarioSchemaVersion) {
    throw InvalidInputError("scenario file " + path + ": unsupported schema_version " +
                            std::to_string(version));
  }
  ScenarioPair pair;
  pair.small = scenario_from_json(j.at("small"));
  pair.large = scenario_from_json(j.at("large"));
  return pair;
}

void save_scenario_pair(const ScenarioPair& pair, const std::string& path) {
  json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["small"] = scenario_to_json(pair.small);
  j["large"] = scenario_to_json(pair.large);
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write scenario file: " + path);
  out << j.dump(2) << "\n";
}

bool evaluate_correctness(const ScriptedScenario& small_script, const Trace& trace) {
  if (trace.status != TraceStatus::complete_eos &&
      trace.status != TraceStatus::complete_max_steps) {
    return false;
  }
  const ScriptedQuestion* q = small_script.find(trace.question_id);
  if (!q) return false;
  for (const auto& step : trace.steps) {
    if (step.index >= q->steps.size()) continue;
    const auto& label = q->steps[step.index].label;
    if (label && *label == StepLabel::unconfident &&
        step.model != routing::ModelChoice::large) {
      return false;
    }
  }
  return true;
}

std::uint64_t approx_prompt_tokens(const std::string& prompt) {
  std::istringstream in(prompt);
  std::string w;
  std::uint64_t n = 0;
  while (in >> w) ++n;
  return n;
}

}  // namespace steer::generators

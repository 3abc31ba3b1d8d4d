// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "steer/confidence.hpp"
#include "steer/trace.hpp"

namespace steer::generators {

inline constexpr std::string_view kStepSeparator = "\n\n";
inline constexpr int kScenarioSchemaVersion = 1;

enum class Backend { scripted, http };

std::string_view to_string(Backend b);
Backend backend_from_string(std::string_view s);

struct GeneratorSpec {
  std::string name;
  std::uint64_t param_count = 0;  // model parameters, for the FLOPs rule
  Backend backend = Backend::scripted;
  std::string endpoint;  // base URL, http backend only
  double temperature = 0.7;
  std::string stop_sequence{kStepSeparator};
  std::size_t max_tokens_per_step = 256;
  std::size_t max_in_flight = 1;  // concurrent request cap, http backend

  void validate() const;  // throws ConfigError
};

// One step's worth of generation: text terminated by the stop sequence, EOS,
// or the token cap. text never contains the stop sequence itself.
struct StepGeneration {
  std::string text;
  std::vector<confidence::TokenObservation> tokens;
  bool eos = false;
  std::uint64_t prompt_tokens = 0;  // prefill size for this call
};

class Generator {
 public:
  virtual ~Generator() = default;
  /// Throws GeneratorError on failure; the engine fails the trace, not the run.
  virtual StepGeneration generate_step(const std::string& prompt) = 0;
  virtual const GeneratorSpec& spec() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted scenarios: a deterministic stand-in for a real model. Each question
// carries an exhaustive per-step script; replay is bit-exact.
// ---------------------------------------------------------------------------

enum class StepLabel { confident, unconfident };

struct ScriptedStep {
  std::string text;
  // Exactly one of the two forms: full per-token logit vectors, or per-token
  // max-logit scalars (realized internally as two-entry logit vectors so
  // every TokenObservation field stays well defined).
  std::vector<std::vector<double>> logits;
  std::vector<double> max_logits;
  bool emit_eos = false;
  // Ground-truth component label used by synthetic scenarios to grade runs.
  std::optional<StepLabel> label;
};

struct ScriptedQuestion {
  std::string id;
  std::string prompt;
  double difficulty = 0.0;  // latent, drives synthetic confidence
  std::string gold_answer;
  std::vector<ScriptedStep> steps;
};

struct ScriptedScenario {
  std::vector<ScriptedQuestion> questions;

  const ScriptedQuestion* find(const std::string& id) const;
  void validate() const;  // throws InvalidInputError
};

class ScriptedGenerator : public Generator {
 public:
  ScriptedGenerator(GeneratorSpec spec, ScriptedScenario scenario);

  StepGeneration generate_step(const std::string& prompt) override;
  const GeneratorSpec& spec() const override { return spec_; }
  const ScriptedScenario& scenario() const { return scenario_; }

 private:
  GeneratorSpec spec_;
  ScriptedScenario scenario_;
};

// ---------------------------------------------------------------------------
// Synthetic scenario construction
// ---------------------------------------------------------------------------

// The two Gaussian components token confidences are drawn from.
struct SynthMixtureSpec {
  double mu_u = 0.0;
  double mu_c = 10.0;
  double sigma_u = 1.0;
  double sigma_c = 1.0;
};

struct SynthOptions {
  std::size_t steps_per_question = 8;
  std::size_t tokens_per_step = 6;
  std::string id_prefix = "q";
};

/// Build a scripted scenario with one question per difficulty_profile entry.
/// Each step draws its component label ~ Bernoulli(difficulty) (unconfident
/// on success) and its token max-logits from that component; labels are
/// stored as ground truth. Requires mu_u < mu_c and positive sigmas.
ScriptedScenario synth_scenario(const std::vector<double>& difficulty_profile,
                                const SynthMixtureSpec& mixture_spec,
                                std::int64_t seed,
                                const SynthOptions& options = {});

// Paired scripts for the two generators over the same questions. Correctness
// ground truth lives in the small script's labels: a step whose small-script
// label is unconfident is only solved when the large model generates it.
struct ScenarioPair {
  ScriptedScenario small;
  ScriptedScenario large;
};

/// Synthesize matched small/large scripts. The large script draws its labels
/// from difficulty * large_difficulty_scale, so a scale of 1 models a large
/// model whose confidence also tracks question difficulty while a scale of 0
/// models one that is always confident.
ScenarioPair synth_scenario_pair(const std::vector<double>& difficulty_profile,
                                 const SynthMixtureSpec& mixture_spec,
                                 std::int64_t seed,
                                 double large_difficulty_scale = 1.0,
                                 const SynthOptions& options = {});

// Scenario-file IO (JSON, versioned with schema_version).
ScenarioPair load_scenario_pair(const std::string& path);
void save_scenario_pair(const ScenarioPair& pair, const std::string& path);

/// Grade a finished trace against the small script's ground-truth labels:
/// correct iff the trace completed and every step whose small-script label is
/// unconfident was generated by the large model.
bool evaluate_correctness(const ScriptedScenario& small_script, const Trace& trace);

/// Word-count prompt-size proxy used by backends that have no tokenizer.
std::uint64_t approx_prompt_tokens(const std::string& prompt);

}  // namespace steer::generators

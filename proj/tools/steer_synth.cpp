// SPDX-License-Identifier: Apache-2.0

// Writes a synthetic scenario-pair file for the scripted backend: a share of
// hard questions whose steps the small model cannot solve, the rest easy.

#include <cstdint>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "steer/generators.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Synthesize a scripted scenario pair"};
  std::string out_path = "scenario.json";
  std::size_t question_count = 60;
  double hard_fraction = 0.4;
  double easy_difficulty = 0.0;
  double hard_difficulty = 1.0;
  std::size_t steps = 8;
  std::size_t tokens = 6;
  std::int64_t seed = 1;
  double mu_u = 0.0, mu_c = 10.0, sigma_u = 1.0, sigma_c = 1.0;
  double large_scale = 1.0;

  app.add_option("--out", out_path, "Output scenario file");
  app.add_option("--questions", question_count, "Number of questions");
  app.add_option("--hard-fraction", hard_fraction, "Fraction of hard questions");
  app.add_option("--easy-difficulty", easy_difficulty, "Difficulty of easy questions");
  app.add_option("--hard-difficulty", hard_difficulty, "Difficulty of hard questions");
  app.add_option("--steps", steps, "Steps per question");
  app.add_option("--tokens", tokens, "Tokens per step");
  app.add_option("--seed", seed, "Seed");
  app.add_option("--mu-u", mu_u, "Unconfident component mean");
  app.add_option("--mu-c", mu_c, "Confident component mean");
  app.add_option("--sigma-u", sigma_u, "Unconfident component sigma");
  app.add_option("--sigma-c", sigma_c, "Confident component sigma");
  app.add_option("--large-scale", large_scale,
                 "Difficulty scale for the large model's script (0 = always confident)");
  CLI11_PARSE(app, argc, argv);

  std::vector<double> profile(question_count, easy_difficulty);
  const auto hard = static_cast<std::size_t>(hard_fraction * static_cast<double>(question_count));
  for (std::size_t i = 0; i < hard && i < question_count; ++i) profile[i] = hard_difficulty;

  steer::generators::SynthMixtureSpec mixture{mu_u, mu_c, sigma_u, sigma_c};
  steer::generators::SynthOptions options;
  options.steps_per_question = steps;
  options.tokens_per_step = tokens;
  const auto pair =
      steer::generators::synth_scenario_pair(profile, mixture, seed, large_scale, options);
  steer::generators::save_scenario_pair(pair, out_path);
  std::cout << "wrote " << out_path << " (" << question_count << " questions, " << hard
            << " hard)\n";
  return 0;
}

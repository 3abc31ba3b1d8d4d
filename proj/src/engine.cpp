// SPDX-License-Identifier: Apache-2.0

#include "steer/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "steer/errors.hpp"

namespace steer {

std::string_view to_string(TraceStatus s) {
  switch (s) {
    case TraceStatus::ongoing: return "ongoing";
    case TraceStatus::complete_eos: return "complete_eos";
    case TraceStatus::complete_max_steps: return "complete_max_steps";
    case TraceStatus::failed: return "failed";
  }
  return "?";
}

TraceStatus trace_status_from_string(std::string_view s) {
  if (s == "ongoing") return TraceStatus::ongoing;
  if (s == "complete_eos") return TraceStatus::complete_eos;
  if (s == "complete_max_steps") return TraceStatus::complete_max_steps;
  if (s == "failed") return TraceStatus::failed;
  throw InvalidInputError("unknown trace status: " + std::string(s));
}

}  // namespace steer

namespace steer::engine {

using generators::Generator;
using generators::kStepSeparator;
using routing::ModelChoice;

void EngineConfig::validate() const {
  if (max_steps == 0) throw ConfigError("engine.max_steps must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("engine.gamma outside [0,1]");
  if (group_count == 0) throw ConfigError("engine.group_count must be positive");
  if (temperature < 0.0) throw ConfigError("engine.temperature negative");
  if (em.max_iterations == 0) throw ConfigError("engine.em.max_iterations must be positive");
  if (!(em.loglik_tolerance > 0.0)) throw ConfigError("engine.em.loglik_tolerance must be positive");
  if (!(em.variance_floor > 0.0)) throw ConfigError("engine.em.variance_floor must be positive");
  if (em.min_samples == 0) throw ConfigError("engine.em.min_samples must be positive");
}

SegmentResult segment_step(std::string_view generated_text, bool eos_signaled) {
  SegmentResult out;
  const auto pos = generated_text.find(kStepSeparator);
  if (pos != std::string_view::npos) {
    out.step_text = std::string(generated_text.substr(0, pos));
    out.hit_separator = true;
    out.hit_eos = false;
  } else {
    out.step_text = std::string(generated_text);
    out.hit_separator = false;
    out.hit_eos = eos_signaled;
  }
  return out;
}

bool is_complete(const Trace& trace, const EngineConfig& config) {
  if (trace.steps.empty()) return false;
  return trace.steps.back().eos || trace.steps.size() >= config.max_steps;
}

std::vector<std::vector<Question>> group_split(const std::vector<Question>& questions,
                                               std::size_t group_count, std::int64_t seed) {
  const std::size_t n = questions.size();
  if (group_count == 0 || group_count > n) {
    throw InvalidInputError("group_split: group count " + std::to_string(group_count) +
                            " invalid for " + std::to_string(n) + " questions");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<Question>> groups(group_count);
  std::size_t cursor = 0;
  for (std::size_t g = 0; g < group_count; ++g) {
    std::size_t size = n / group_count + (g < n % group_count ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) groups[g].push_back(questions[order[cursor++]]);
  }
  return groups;
}

std::vector<Question> questions_from_scenario(const generators::ScriptedScenario& scenario) {
  std::vector<Question> out;
  for (const auto& q : scenario.questions) out.push_back({q.id, q.prompt});
  return out;
}

namespace {

// Run fn(0..count-1) with at most `cap` worker threads. Results must land in
// pre-sized slots; all post-processing stays on the caller's thread so the
// run is indistinguishable from sequential execution.
template <typename Fn>
void bounded_parallel(std::size_t count, std::size_t cap, Fn&& fn) {
  if (cap <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      fn(i);
    }
  };
  std::vector<std::thread> threads;
  const std::size_t workers = std::min(cap, count);
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
}

struct PendingGeneration {
  Trace* trace = nullptr;
  Generator* generator = nullptr;
  std::string prompt;
  generators::StepGeneration result;
  std::exception_ptr error;

  static PendingGeneration of(Trace* t, Generator* g) {
    PendingGeneration item;
    item.trace = t;
    item.generator = g;
    return item;
  }
};

class Run {
 public:
  Run(const std::vector<Question>& questions, Generator& small, Generator& large,
      const EngineConfig& config, const routing::RoutingPolicy& policy,
      events::EventSink& sink)
      : small_(small), large_(large), config_(config), policy_(policy), sink_(sink) {
    config_.validate();
    routing::validate(policy_);
    small_.spec().validate();
    large_.spec().validate();
    if (questions.empty()) throw InvalidInputError("run: no questions");

    result_.traces.reserve(questions.size());
    for (const auto& q : questions) {
      if (counters_.count(q.id)) throw InvalidInputError("run: duplicate question id " + q.id);
      Trace t;
      t.question_id = q.id;
      t.prompt = q.prompt;
      t.current_model =
          policy_.kind == routing::PolicyKind::always_large ? ModelChoice::large : ModelChoice::small;
      result_.traces.push_back(std::move(t));
      counters_[q.id];  // materialize in question order
    }
    auto& ledger = result_.ledger;
    ledger.models[small_.spec().name].param_count = small_.spec().param_count;
    ledger.models[large_.spec().name].param_count = large_.spec().param_count;
  }

  RunResult run() {
    emit_run_start();
    initial_generation();
    if (policy_.kind == routing::PolicyKind::posterior_threshold ||
        policy_.kind == routing::PolicyKind::percentile) {
      first_step_refinement();
    }
    for (std::size_t step = 1; step < config_.max_steps; ++step) {
      if (ongoing().empty()) break;
      iterate(step);
    }
    finalize();
    return std::move(result_);
  }

 private:
  struct TraceCounters {
    std::uint64_t tokens_small = 0;
    std::uint64_t tokens_large = 0;
  };

  Generator& generator_for(ModelChoice m) { return m == ModelChoice::small ? small_ : large_; }

  std::vector<Trace*> ongoing() {
    std::vector<Trace*> out;
    for (auto& t : result_.traces) {
      if (t.status == TraceStatus::ongoing) out.push_back(&t);
    }
    return out;
  }

  static std::string build_prompt(const Trace& trace) {
    std::string prompt = trace.prompt;
    for (const auto& step : trace.steps) {
      prompt += kStepSeparator;
      prompt += step.text;
    }
    return prompt;
  }

  void emit_run_start() {
    events::Event e;
    e.event = "run_start";
    nlohmann::json params;
    params["policy"] = {{"kind", std::string(routing::to_string(policy_.kind))}};
    if (policy_.gamma) params["policy"]["gamma"] = *policy_.gamma;
    if (policy_.percentile_p) params["policy"]["percentile_p"] = *policy_.percentile_p;
    params["engine"] = {{"max_steps", config_.max_steps},
                        {"gamma", config_.gamma},
                        {"metric", std::string(confidence::to_string(config_.metric))},
                        {"aggregation", std::string(confidence::to_string(config_.aggregation))},
                        {"group_count", config_.group_count},
                        {"temperature", config_.temperature},
                        {"seed", config_.seed},
                        {"per_model_fit", config_.per_model_fit},
                        {"warm_start", config_.warm_start},
                        {"em",
                         {{"max_iterations", config_.em.max_iterations},
                          {"loglik_tolerance", config_.em.loglik_tolerance},
                          {"variance_floor", config_.em.variance_floor},
                          {"min_samples", config_.em.min_samples}}}};
    params["generators"] = {{"small", small_.spec().name}, {"large", large_.spec().name}};
    e.params = std::move(params);
    e.timestamp = events::now_millis();
    sink_.append(e);
  }

  void emit_step(const Trace& trace, const StepRecord& step) {
    events::Event e;
    e.event = "step_generated";
    e.step_index = static_cast<std::int64_t>(step.index);
    e.trace_id = trace.question_id;
    e.model = std::string(routing::to_string(step.model));
    e.phi = step.confidence.value;
    e.timestamp = events::now_millis();
    sink_.append(e);
  }

  void emit_fit(std::size_t step, const std::optional<mixture::MixtureParams>& params,
                events::ParamsOrigin origin, std::optional<ModelChoice> pool_model) {
    events::Event e;
    e.event = "fit_computed";
    e.step_index = static_cast<std::int64_t>(step);
    if (pool_model) e.model = std::string(routing::to_string(*pool_model));
    e.params = params ? events::params_to_json(*params, origin)
                      : nlohmann::json{{"origin", std::string(events::to_string(origin))}};
    e.timestamp = events::now_millis();
    sink_.append(e);
  }

  void emit_route(std::size_t step, const Trace& trace, double phi,
                  std::optional<double> posterior, ModelChoice decision) {
    events::Event e;
    e.event = "route_decided";
    e.step_index = static_cast<std::int64_t>(step);
    e.trace_id = trace.question_id;
    e.model = std::string(routing::to_string(decision));
    e.phi = phi;
    e.posterior = posterior;
    e.timestamp = events::now_millis();
    sink_.append(e);
  }

  void emit_completion(const Trace& trace) {
    events::Event e;
    e.event = trace.status == TraceStatus::failed ? "trace_failed" : "trace_completed";
    e.step_index = trace.steps.empty()
                       ? std::optional<std::int64_t>{}
                       : std::optional<std::int64_t>(static_cast<std::int64_t>(trace.steps.size() - 1));
    e.trace_id = trace.question_id;
    e.timestamp = events::now_millis();
    sink_.append(e);
  }

  // Generate one step for every (trace, generator) pair, bounded-concurrently.
  // Appending, accounting, and events happen afterwards in input order.
  // A refinement barrier regenerates step 0, so its prompt is the bare
  // question, not the discarded small-model step.
  void generate_barrier(std::vector<PendingGeneration>& batch, std::size_t step_index,
                        bool refined) {
    for (auto& item : batch) {
      item.prompt = refined ? item.trace->prompt : build_prompt(*item.trace);
    }
    const std::size_t cap =
        std::max(small_.spec().max_in_flight, large_.spec().max_in_flight);
    bounded_parallel(batch.size(), cap, [&](std::size_t i) {
      auto& item = batch[i];
      try {
        item.result = item.generator->generate_step(item.prompt);
      } catch (...) {
        item.error = std::current_exception();
      }
    });

    for (auto& item : batch) {
      Trace& trace = *item.trace;
      if (item.error) {
        fail_trace(trace);
        continue;
      }
      try {
        append_step(trace, step_index, item.result,
                    item.generator == &large_ ? ModelChoice::large : ModelChoice::small, refined);
      } catch (const std::exception&) {
        fail_trace(trace);
      }
    }
  }

  void append_step(Trace& trace, std::size_t step_index, const generators::StepGeneration& gen,
                   ModelChoice model, bool refined) {
    const auto segment = segment_step(gen.text, gen.eos);
    if (segment.hit_separator) {
      // Generators contract: emitted step text never contains the separator.
      throw GeneratorError("generator returned text containing the step separator");
    }

    StepRecord step;
    step.index = step_index;
    step.text = segment.step_text;
    step.model = model;
    step.confidence = confidence::aggregate_step(gen.tokens, config_.metric, config_.aggregation);
    step.token_count = gen.tokens.size();
    step.refined = refined;
    step.eos = segment.hit_eos;

    const std::string& model_name = generator_for(model).spec().name;
    result_.ledger.add_generated(model_name, gen.tokens.size());
    result_.ledger.add_prompt(model_name, gen.prompt_tokens);
    result_.ledger.note_confidence_source(model_name,
                                          confidence::to_string(gen.tokens.front().source));
    auto& counter = counters_[trace.question_id];
    (model == ModelChoice::small ? counter.tokens_small : counter.tokens_large) +=
        gen.tokens.size();

    if (refined) {
      trace.steps.back() = std::move(step);
    } else {
      trace.steps.push_back(std::move(step));
    }
    emit_step(trace, trace.steps.back());

    if (is_complete(trace, config_)) {
      trace.status = trace.steps.back().eos ? TraceStatus::complete_eos
                                            : TraceStatus::complete_max_steps;
      emit_completion(trace);
    }
  }

  void fail_trace(Trace& trace) {
    trace.status = TraceStatus::failed;
    emit_completion(trace);
  }

  void initial_generation() {
    Generator& gen =
        policy_.kind == routing::PolicyKind::always_large ? large_ : small_;
    std::vector<PendingGeneration> batch;
    for (auto& trace : result_.traces) batch.push_back(PendingGeneration::of(&trace, &gen));
    generate_barrier(batch, 0, /*refined=*/false);
  }

  // Routing decisions for one barrier, with fit/route events. The phi fed to
  // the rule is the confidence of each ongoing trace's most recent step.
  std::map<std::string, ModelChoice> route_barrier(const std::vector<Trace*>& pool,
                                                   std::size_t step_index) {
    std::map<std::string, ModelChoice> decisions;
    if (policy_.kind == routing::PolicyKind::always_small) {
      for (auto* t : pool) decisions[t->question_id] = ModelChoice::small;
      return decisions;
    }
    if (policy_.kind == routing::PolicyKind::always_large) {
      for (auto* t : pool) decisions[t->question_id] = ModelChoice::large;
      return decisions;
    }

    if (policy_.kind == routing::PolicyKind::percentile) {
      std::vector<routing::ConfidencePoint> points;
      for (auto* t : pool) points.push_back({t->question_id, t->steps.back().confidence.value});
      const auto partition = routing::percentile_route(points, *policy_.percentile_p);
      for (const auto& id : partition.small_ids) decisions[id] = ModelChoice::small;
      for (const auto& id : partition.large_ids) decisions[id] = ModelChoice::large;
      for (auto* t : pool) {
        emit_route(step_index, *t, t->steps.back().confidence.value, std::nullopt,
                   decisions.at(t->question_id));
      }
      return decisions;
    }

    // posterior_threshold: one pooled fit, or one per generating model.
    const double gamma = *policy_.gamma;
    auto route_pool = [&](const std::vector<Trace*>& subset, const std::string& fit_key,
                          std::optional<ModelChoice> pool_model) {
      if (subset.empty()) return;
      std::vector<double> samples;
      for (auto* t : subset) samples.push_back(t->steps.back().confidence.value);
      auto [params, origin] = fit_with_fallback(samples, fit_key);
      emit_fit(step_index, params, origin, pool_model);
      for (auto* t : subset) {
        const double phi = t->steps.back().confidence.value;
        ModelChoice choice = ModelChoice::small;
        std::optional<double> posterior;
        if (params) {
          posterior = mixture::posterior_confident(phi, *params);
          if (!params->weak_separation) choice = routing::decide(*posterior, gamma);
        }
        decisions[t->question_id] = choice;
        emit_route(step_index, *t, phi, posterior, choice);
      }
    };

    if (config_.per_model_fit) {
      std::vector<Trace*> by_model[2];
      for (auto* t : pool) {
        by_model[t->steps.back().model == ModelChoice::large ? 1 : 0].push_back(t);
      }
      route_pool(by_model[0], "small", ModelChoice::small);
      route_pool(by_model[1], "large", ModelChoice::large);
    } else {
      route_pool(pool, "pooled", std::nullopt);
    }
    return decisions;
  }

  // Fit the mixture over this barrier's samples. Too few samples (or a
  // degenerate set) falls back to the most recent successful fit for the same
  // pool; with no earlier fit, no params are returned and every trace stays
  // on the small model.
  std::pair<std::optional<mixture::MixtureParams>, events::ParamsOrigin> fit_with_fallback(
      const std::vector<double>& samples, const std::string& key) {
    auto last = last_fit_.find(key);
    if (samples.size() >= config_.em.min_samples) {
      try {
        mixture::EmConfig em = config_.em;
        if (config_.warm_start && last != last_fit_.end()) {
          em.warm_start = last->second;
        }
        const auto fit = mixture::fit_em(samples, em);
        last_fit_[key] = fit.params;
        return {fit.params, events::ParamsOrigin::fit};
      } catch (const DegenerateFitError&) {
        // fall through to reuse
      }
    }
    if (last != last_fit_.end()) {
      return {last->second, events::ParamsOrigin::reused};
    }
    return {std::nullopt, events::ParamsOrigin::none};
  }

  void first_step_refinement() {
    const auto pool = ongoing();
    if (pool.empty()) return;
    const auto decisions = route_barrier(pool, 0);

    std::vector<PendingGeneration> batch;
    for (auto* t : pool) {
      t->current_model = decisions.at(t->question_id);
      if (t->current_model == ModelChoice::large) batch.push_back(PendingGeneration::of(t, &large_));
    }
    if (batch.empty()) return;
    generate_barrier(batch, 0, /*refined=*/true);
  }

  void iterate(std::size_t step_index) {
    const auto pool = ongoing();
    if (pool.empty()) return;
    const auto decisions = route_barrier(pool, step_index);

    std::vector<PendingGeneration> batch;
    for (auto* t : pool) {
      const ModelChoice choice = decisions.at(t->question_id);
      t->current_model = choice;
      batch.push_back(PendingGeneration::of(t, &generator_for(choice)));
    }
    generate_barrier(batch, step_index, /*refined=*/false);
  }

  void finalize() {
    for (auto& trace : result_.traces) {
      // A trace still ongoing here ran out of budget without EOS.
      if (trace.status == TraceStatus::ongoing) {
        trace.status = TraceStatus::complete_max_steps;
        emit_completion(trace);
      }
    }
    auto& ledger = result_.ledger;
    for (const auto& trace : result_.traces) {
      const auto& counter = counters_.at(trace.question_id);
      cost::TraceCost record;
      record.trace_id = trace.question_id;
      record.tokens_small = counter.tokens_small;
      record.tokens_large = counter.tokens_large;
      record.status = trace.status;
      ledger.per_trace.push_back(std::move(record));
    }
    ledger.finalize(result_.traces);
  }

  Generator& small_;
  Generator& large_;
  EngineConfig config_;
  routing::RoutingPolicy policy_;
  events::EventSink& sink_;
  RunResult result_;
  std::map<std::string, TraceCounters> counters_;
  std::map<std::string, mixture::MixtureParams> last_fit_;
};

}  // namespace

RunResult run_with_policy(const std::vector<Question>& questions, Generator& small,
                          Generator& large, const EngineConfig& config,
                          const routing::RoutingPolicy& policy, events::EventSink& sink) {
  Run run(questions, small, large, config, policy, sink);
  return run.run();
}

RunResult run_steer(const std::vector<Question>& questions, Generator& small, Generator& large,
                    const EngineConfig& config, events::EventSink& sink) {
  routing::RoutingPolicy policy;
  policy.kind = routing::PolicyKind::posterior_threshold;
  policy.gamma = config.gamma;
  return run_with_policy(questions, small, large, config, policy, sink);
}

RunResult run_grouped(const std::vector<Question>& questions, Generator& small, Generator& large,
                      const EngineConfig& config, const routing::RoutingPolicy& policy,
                      events::EventSink& sink) {
  if (config.group_count > questions.size()) {
    throw InvalidInputError("group_count exceeds question count");
  }
  if (config.group_count <= 1) {
    return run_with_policy(questions, small, large, config, policy, sink);
  }
  const auto groups = group_split(questions, config.group_count, config.seed);
  RunResult merged;
  merged.ledger.models[small.spec().name].param_count = small.spec().param_count;
  merged.ledger.models[large.spec().name].param_count = large.spec().param_count;
  for (const auto& group : groups) {
    auto result = run_with_policy(group, small, large, config, policy, sink);
    merged.ledger.absorb(result.ledger);
    for (auto& trace : result.traces) merged.traces.push_back(std::move(trace));
  }
  merged.ledger.finalize(merged.traces);
  return merged;
}

}  // namespace steer::engine

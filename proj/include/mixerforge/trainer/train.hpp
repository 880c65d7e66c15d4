#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixerforge/hybrid/checkpoint.hpp"
#include "mixerforge/hybrid/model.hpp"
#include "mixerforge/numerics/autodiff.hpp"
#include "mixerforge/tasks/tasks.hpp"
#include "mixerforge/trainer/adamw.hpp"

namespace mixerforge {

struct TrainOptions {
  std::size_t batch_size = 16;
  std::size_t eval_examples = 256;
  std::size_t eval_batch = 32;
  bool fixed_batch = false;     // every step reuses the first batch
  std::string checkpoint_path;  // written after training or on divergence

  void validate() const {
    if (batch_size == 0 || eval_examples == 0 || eval_batch == 0)
      throw ConfigError("batch_size, eval_examples and eval_batch must be positive");
  }
};

inline void to_json(nlohmann::json& j, const TrainOptions& o) {
  j = nlohmann::json{{"batch_size", o.batch_size}, {"eval_examples", o.eval_examples}, {"eval_batch", o.eval_batch},
                     {"fixed_batch", o.fixed_batch}, {"checkpoint_path", o.checkpoint_path}};
}

inline void from_json(const nlohmann::json& j, TrainOptions& o) {
  reject_unknown_keys(j, {"batch_size", "eval_examples", "eval_batch", "fixed_batch", "checkpoint_path"}, "train options");
  try {
    if (j.contains("batch_size")) o.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("eval_examples")) o.eval_examples = j.at("eval_examples").get<std::size_t>();
    if (j.contains("eval_batch")) o.eval_batch = j.at("eval_batch").get<std::size_t>();
    if (j.contains("fixed_batch")) o.fixed_batch = j.at("fixed_batch").get<bool>();
    if (j.contains("checkpoint_path")) o.checkpoint_path = j.at("checkpoint_path").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train options: ") + e.what());
  }
}

struct TrainReport {
  std::uint64_t seed = 0;
  std::string task;
  std::size_t parameter_count = 0;
  std::size_t steps_completed = 0;
  std::vector<double> losses;  // mean supervised cross-entropy per step
  std::map<std::string, double> metrics;  // accuracy, token_loss on the eval split
  double wall_time_seconds = 0.0;
  bool diverged = false;
  std::string error;

  /// Equality on everything except wall time.
  [[nodiscard]] bool same_outcome(const TrainReport& o) const {
    return seed == o.seed && task == o.task && parameter_count == o.parameter_count &&
           steps_completed == o.steps_completed && losses == o.losses && metrics == o.metrics &&
           diverged == o.diverged && error == o.error;
  }
};

inline void to_json(nlohmann::json& j, const TrainReport& r) {
  j = nlohmann::json{{"seed", r.seed},
                     {"task", r.task},
                     {"parameter_count", r.parameter_count},
                     {"steps_completed", r.steps_completed},
                     {"losses", r.losses},
                     {"metrics", r.metrics},
                     {"wall_time_seconds", r.wall_time_seconds},
                     {"diverged", r.diverged},
                     {"error", r.error}};
}

template <std::floating_point T>
struct TrainResult {
  TrainReport report;
  HybridModel<T> model;
  AdamState<T> optimizer;
};

/// Called with the clipped-to-be gradients before each update.
template <std::floating_point T>
using GradientHook = std::function<void(std::size_t step, NamedTensors<Tensor<T>>& grads)>;

/// One-hot inputs and per-row target weights (1/count at the target column)
/// for a batch, written into preallocated (B*L) x V tensors.
template <std::floating_point T>
std::size_t fill_batch(const Dataset& batch, std::size_t vocab, Tensor<T>& tokens, Tensor<T>& targets) {
  std::fill(tokens.data().begin(), tokens.data().end(), T{0});
  std::fill(targets.data().begin(), targets.data().end(), T{0});
  const std::size_t count = batch.supervised();
  const std::size_t L = batch.inputs.front().size();
  for (std::size_t e = 0; e < batch.size(); ++e)
    for (std::size_t t = 0; t < L; ++t) {
      const int in = batch.inputs[e][t], tg = batch.targets[e][t];
      if (in < 0 || static_cast<std::size_t>(in) >= vocab || tg >= static_cast<int>(vocab))
        throw InputError("token outside model vocabulary " + std::to_string(vocab));
      tokens.at(e * L + t, static_cast<std::size_t>(in)) = T{1};
      if (tg != kIgnoreIndex) targets.at(e * L + t, static_cast<std::size_t>(tg)) = T{1} / static_cast<T>(count);
    }
  return count;
}

/// Scores a model on a dataset, running `chunk` sequences per forward pass.
template <std::floating_point T>
Score score_model(const HybridModel<T>& model, const Dataset& data, std::size_t chunk = 32) {
  std::vector<Tensor<T>> logits;
  logits.reserve(data.size());
  for (std::size_t e0 = 0; e0 < data.size(); e0 += chunk) {
    const std::size_t e1 = std::min(data.size(), e0 + chunk);
    const std::vector<std::vector<int>> seqs(data.inputs.begin() + static_cast<std::ptrdiff_t>(e0),
                                             data.inputs.begin() + static_cast<std::ptrdiff_t>(e1));
    const Tensor<T> all = model.forward_batch(seqs);
    const std::size_t L = seqs.front().size();
    for (std::size_t e = 0; e < seqs.size(); ++e) logits.push_back(slice(all, e * L, (e + 1) * L, 0, all.cols()));
  }
  return score_logits(logits, data);
}

inline TaskConfig eval_task(const TaskConfig& task, const TrainOptions& options) {
  TaskConfig t = task;
  t.split = Split::Eval;
  t.examples = options.eval_examples;
  return t;
}

/// Deterministic loop: generate batch, forward, supervised cross-entropy,
/// backward, clip, AdamW. Step s trains on batch seed derive_seed(seed, s);
/// the eval split depends only on the task seed.
template <std::floating_point T = float>
TrainResult<T> train(const HybridConfig& config, const TaskConfig& task, const OptimizerHyperparams& hp,
                     std::uint64_t seed, const TrainOptions& options = {}, const GradientHook<T>& hook = {}) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  task.validate();
  hp.validate();
  options.validate();
  if (task_vocab(task) > config.vocab)
    throw ConfigError("model vocab " + std::to_string(config.vocab) + " smaller than task vocab " +
                      std::to_string(task_vocab(task)));
  if (task.length > config.max_len)
    throw ConfigError("task length " + std::to_string(task.length) + " exceeds max_len " + std::to_string(config.max_len));

  TrainResult<T> result{{}, HybridModel<T>(config, derive_seed(seed, 0)), {}};
  auto& model = result.model;
  auto& report = result.report;
  result.optimizer = init_adam(model.params());
  report.seed = seed;
  report.task = to_string(task.kind);
  report.parameter_count = model.parameter_count();

  const std::size_t B = options.batch_size, L = task.length, V = config.vocab;
  const TrainingGraph tg = build_training_graph(config, B, L);
  Evaluator<T> ev(tg.graph);
  Tensor<T> tokens(Shape{B * L, V}), targets(Shape{B * L, V});
  std::vector<bool> wanted(tg.graph.leaf_count(), false);
  std::vector<std::pair<std::size_t, std::string>> param_leaves;
  for (const auto& spec : model_param_specs(config)) {
    const auto idx = tg.graph.leaf_index(spec.name);
    if (!idx) throw ConfigError("training graph lacks parameter '" + spec.name + "'");
    ev.bind(*idx, lookup(model.params(), spec.name));
    if (!spec.trainable) continue;
    wanted[*idx] = true;
    param_leaves.emplace_back(*idx, spec.name);
  }
  ev.bind("tokens", tokens);
  ev.bind("targets", targets);

  auto batch_task = task;
  batch_task.examples = B;
  batch_task.split = Split::Train;
  auto good_params = model.params();
  auto good_optimizer = result.optimizer;
  NamedTensors<Tensor<T>> grads;

  for (std::size_t step = 1; step <= hp.total_steps; ++step) {
    batch_task.seed = derive_seed(seed, options.fixed_batch ? 1 : step);
    if (step == 1 || !options.fixed_batch) fill_batch(generate(batch_task), V, tokens, targets);
    try {
      ev.forward();
      const double loss = static_cast<double>(ev.root_scalar());
      if (!std::isfinite(loss)) throw NumericError("non-finite loss");
      good_params = model.params();
      good_optimizer = result.optimizer;
      ev.backward(wanted);
      grads.clear();
      for (const auto& [idx, name] : param_leaves) grads.emplace(name, ev.leaf_grad(idx));
      if (hook) hook(step, grads);
      clip_global_norm(grads, hp.clip_norm);
      adamw_step(model.params(), grads, result.optimizer, step, cosine_lr(step, hp), hp);
      report.losses.push_back(loss);
      report.steps_completed = step;
    } catch (const NumericError& e) {
      model.params() = good_params;
      result.optimizer = good_optimizer;
      report.diverged = true;
      report.error = "diverged at step " + std::to_string(step) + ": " + e.what();
      break;
    }
  }

  if (!options.checkpoint_path.empty())
    save_checkpoint(options.checkpoint_path, optimizer_checkpoint(model, result.optimizer, hp));
  if (!report.diverged) {
    const Score s = score_model(model, generate(eval_task(task, options)), options.eval_batch);
    report.metrics["accuracy"] = s.accuracy;
    report.metrics["token_loss"] = s.token_loss;
  }
  report.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace mixerforge

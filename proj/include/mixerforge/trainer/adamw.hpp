#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mixerforge/hybrid/checkpoint.hpp"
#include "mixerforge/hybrid/config.hpp"

namespace mixerforge {

struct OptimizerHyperparams {
  double base_lr = 3e-3;
  double min_lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 1.0;  // global gradient norm; <= 0 disables clipping
  std::size_t total_steps = 1000;
  std::optional<std::size_t> warmup_steps;  // unset: 5% of total_steps

  [[nodiscard]] std::size_t warmup() const {
    return warmup_steps ? *warmup_steps : static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(total_steps)));
  }

  void validate() const {
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(base_lr) || !finite(min_lr) || base_lr < 0 || min_lr < 0)
      throw ConfigError("learning rates must be finite and non-negative");
    if (min_lr > base_lr) throw ConfigError("min_lr must not exceed base_lr");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("beta1 and beta2 must lie in [0, 1)");
    if (!(eps > 0) || !finite(eps)) throw ConfigError("eps must be positive");
    if (!finite(weight_decay) || weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
    if (!finite(clip_norm)) throw ConfigError("clip_norm must be finite");
    if (warmup() > total_steps) throw ConfigError("warmup_steps exceeds total_steps");
  }
};

inline void to_json(nlohmann::json& j, const OptimizerHyperparams& h) {
  j = nlohmann::json{{"base_lr", h.base_lr},         {"min_lr", h.min_lr},       {"beta1", h.beta1},
                     {"beta2", h.beta2},             {"eps", h.eps},             {"weight_decay", h.weight_decay},
                     {"clip_norm", h.clip_norm},     {"total_steps", h.total_steps},
                     {"warmup_steps", h.warmup_steps ? nlohmann::json(*h.warmup_steps) : nlohmann::json(nullptr)}};
}

inline void from_json(const nlohmann::json& j, OptimizerHyperparams& h) {
  reject_unknown_keys(j,
                      {"base_lr", "min_lr", "beta1", "beta2", "eps", "weight_decay", "clip_norm", "total_steps",
                       "warmup_steps"},
                      "optimizer config");
  try {
    if (j.contains("base_lr")) h.base_lr = j.at("base_lr").get<double>();
    if (j.contains("min_lr")) h.min_lr = j.at("min_lr").get<double>();
    if (j.contains("beta1")) h.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) h.beta2 = j.at("beta2").get<double>();
    if (j.contains("eps")) h.eps = j.at("eps").get<double>();
    if (j.contains("weight_decay")) h.weight_decay = j.at("weight_decay").get<double>();
    if (j.contains("clip_norm")) h.clip_norm = j.at("clip_norm").get<double>();
    if (j.contains("total_steps")) h.total_steps = j.at("total_steps").get<std::size_t>();
    if (j.contains("warmup_steps") && !j.at("warmup_steps").is_null())
      h.warmup_steps = j.at("warmup_steps").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("optimizer config: ") + e.what());
  }
}

/// Linear warmup to base_lr, then cosine decay to min_lr at total_steps.
inline double cosine_lr(std::size_t step, const OptimizerHyperparams& hp) {
  if (step > hp.total_steps)
    throw ConfigError("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(hp.total_steps) + "]");
  const std::size_t warm = hp.warmup();
  if (step < warm) return hp.base_lr * static_cast<double>(step) / static_cast<double>(warm);
  if (hp.total_steps == warm) return hp.base_lr;
  const double progress = static_cast<double>(step - warm) / static_cast<double>(hp.total_steps - warm);
  return hp.min_lr + 0.5 * (hp.base_lr - hp.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <std::floating_point T>
struct AdamState {
  NamedTensors<Tensor<T>> m;
  NamedTensors<Tensor<T>> v;
  std::size_t step = 0;  // updates applied so far

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

template <std::floating_point T>
AdamState<T> init_adam(const NamedTensors<Tensor<T>>& params) {
  AdamState<T> s;
  for (const auto& [name, p] : params) {
    s.m.emplace(name, Tensor<T>(p.shape(), T{0}));
    s.v.emplace(name, Tensor<T>(p.shape(), T{0}));
  }
  return s;
}

/// Global L2 norm of all gradients, accumulated in double in name order.
template <std::floating_point T>
double global_norm(const NamedTensors<Tensor<T>>& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (T x : g.data()) sq += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sq);
}

/// Rescales the gradients to norm `max_norm` if they exceed it. Returns the
/// norm before clipping.
template <std::floating_point T>
double clip_global_norm(NamedTensors<Tensor<T>>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (max_norm > 0 && norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (auto& [name, g] : grads)
      for (T& x : g.data()) x *= s;
  }
  return norm;
}

/// One decoupled-weight-decay Adam update at `step` (1-based) with learning
/// rate `lr`. Only parameters that have a gradient move. Nothing is modified
/// if any gradient is non-finite.
template <std::floating_point T>
void adamw_step(NamedTensors<Tensor<T>>& params, const NamedTensors<Tensor<T>>& grads, AdamState<T>& state,
                std::size_t step, double lr, const OptimizerHyperparams& hp) {
  if (step == 0) throw ConfigError("adamw_step: step is 1-based");
  for (const auto& [name, g] : grads) {
    auto p = params.find(name);
    if (p == params.end()) throw ConfigError("adamw_step: gradient for unknown parameter '" + name + "'");
    if (g.shape() != p->second.shape() || lookup(state.m, name).shape() != g.shape() ||
        lookup(state.v, name).shape() != g.shape())
      throw ShapeError("adamw_step: shape mismatch for '" + name + "'");
    for (std::size_t i = 0; i < g.numel(); ++i)
      if (!std::isfinite(g.data()[i]))
        throw NumericError("adamw_step: non-finite gradient in '" + name + "' at element " + std::to_string(i));
  }
  const double c1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(hp.beta1), b2 = static_cast<T>(hp.beta2);
  for (const auto& [name, grad] : grads) {
    const auto g = grad.data();
    auto m = state.m.find(name)->second.data();
    auto v = state.v.find(name)->second.data();
    auto w = params.find(name)->second.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const double mhat = static_cast<double>(m[i]) / c1;
      const double vhat = static_cast<double>(v[i]) / c2;
      const double wi = static_cast<double>(w[i]);
      w[i] = static_cast<T>(wi - lr * (mhat / (std::sqrt(vhat) + hp.eps) + hp.weight_decay * wi));
    }
  }
  state.step = step;
}

// ---------------------------------------------------------------------------
// Optimizer checkpoints: model parameters plus adam.m.* / adam.v.* moments.

inline constexpr std::string_view kAdamMoment1 = "adam.m.";
inline constexpr std::string_view kAdamMoment2 = "adam.v.";

template <std::floating_point T>
Checkpoint<T> optimizer_checkpoint(const HybridModel<T>& model, const AdamState<T>& state,
                                   const OptimizerHyperparams& hp) {
  Checkpoint<T> ck = model_checkpoint(model);
  ck.header["optimizer"] = hp;
  ck.header["step"] = state.step;
  for (const auto& [name, t] : state.m) ck.tensors.emplace(std::string(kAdamMoment1) + name, t);
  for (const auto& [name, t] : state.v) ck.tensors.emplace(std::string(kAdamMoment2) + name, t);
  return ck;
}

template <std::floating_point T>
AdamState<T> adam_state_from_checkpoint(const Checkpoint<T>& ck) {
  AdamState<T> s;
  if (!ck.header.contains("step")) throw InputError("checkpoint has no optimizer step");
  s.step = ck.header.at("step").template get<std::size_t>();
  for (const auto& [name, t] : ck.tensors) {
    if (name.starts_with(kAdamMoment1)) s.m.emplace(name.substr(kAdamMoment1.size()), t);
    else if (name.starts_with(kAdamMoment2)) s.v.emplace(name.substr(kAdamMoment2.size()), t);
  }
  if (s.m.size() != s.v.size() || s.m.empty()) throw InputError("checkpoint optimizer moments are incomplete");
  return s;
}

}  // namespace mixerforge

#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mixerforge/mixers/kind.hpp"
#include "mixerforge/numerics/graph.hpp"
#include "mixerforge/numerics/ops.hpp"
#include "mixerforge/numerics/random.hpp"

namespace mixerforge {

enum class ParamInit { Weight, Zeros, Ones, DecayHeads };

struct ParamSpec {
  std::string name;
  Shape shape;
  ParamInit init;
  std::size_t fan_in = 1;
  bool trainable = true;
};

/// Parameters one mixer layer needs, by name.
///
/// All kinds share the q/k/v projections (d_model x d_model, head h owns
/// columns [h*d, (h+1)*d)). Gate projections are `sigmoid(x W + b)`:
/// per-channel gates use d_model columns, scalar per-head gates use H.
inline std::vector<ParamSpec> mixer_param_specs(MixerKind kind, const Dimensions& dims) {
  const std::size_t dm = dims.d_model, h = dims.H;
  std::vector<ParamSpec> specs = {
      {"wq", {dm, dm}, ParamInit::Weight, dm},
      {"wk", {dm, dm}, ParamInit::Weight, dm},
      {"wv", {dm, dm}, ParamInit::Weight, dm},
  };
  auto gate = [&](const std::string& name, std::size_t width) {
    specs.push_back({"w_" + name, {dm, width}, ParamInit::Weight, dm});
    specs.push_back({"b_" + name, {1, width}, ParamInit::Zeros, 1});
  };
  switch (kind) {
    case MixerKind::HGRN:
    case MixerKind::GLA:
    case MixerKind::HGRN2: gate("alpha", dm); break;
    case MixerKind::RWKV6:
      gate("alpha", dm);
      specs.push_back({"bonus", {1, dm}, ParamInit::Zeros, 1});
      break;
    case MixerKind::Hawk:
      gate("r", dm);
      gate("i", dm);
      break;
    case MixerKind::RetNet: specs.push_back({"gamma", {1, h}, ParamInit::DecayHeads, 1, false}); break;
    case MixerKind::Mamba2: gate("gamma", h); break;
    case MixerKind::DeltaNet: gate("beta", h); break;
    case MixerKind::GatedDeltaNet:
      gate("beta", h);
      gate("alpha", h);
      break;
  }
  return specs;
}

/// RetNet decays: 1 - gamma_h log-spaced inside (0.001, 0.1), so every
/// gamma_h lies in (0.9, 0.999).
inline std::vector<double> retnet_decays(std::size_t heads) {
  std::vector<double> out(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const double frac = (static_cast<double>(h) + 0.5) / static_cast<double>(heads);
    out[h] = 1.0 - std::pow(10.0, -1.0 - 2.0 * frac);
  }
  return out;
}

template <std::floating_point T>
Tensor<T> init_param(const ParamSpec& spec, Rng& rng) {
  switch (spec.init) {
    case ParamInit::Weight: {
      const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
      return rng.uniform_tensor<T>(spec.shape, -bound, bound);
    }
    case ParamInit::Zeros: return Tensor<T>(spec.shape);
    case ParamInit::Ones: return Tensor<T>(spec.shape, T{1});
    case ParamInit::DecayHeads: {
      auto decays = retnet_decays(spec.shape.back());
      return Tensor<T>(spec.shape, std::vector<T>(decays.begin(), decays.end()));
    }
  }
  return {};
}

/// Named parameter tensors of one mixer layer. `V` is Tensor<T> for eager
/// evaluation or Expr for graph construction.
template <class V>
struct MixerParams {
  MixerKind kind = MixerKind::GLA;
  Dimensions dims;
  std::map<std::string, V> tensors;

  [[nodiscard]] bool has(const std::string& name) const { return tensors.count(name) != 0; }
  [[nodiscard]] const V& get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw ConfigError(std::string(to_string(kind)) + " parameters have no '" + name + "'");
    return it->second;
  }
  V& get(const std::string& name) {
    return const_cast<V&>(static_cast<const MixerParams&>(*this).get(name));
  }
};

template <std::floating_point T>
MixerParams<Tensor<T>> init_mixer_params(MixerKind kind, const Dimensions& dims, Rng& rng) {
  dims.validate(kind);
  MixerParams<Tensor<T>> p{kind, dims, {}};
  for (const auto& spec : mixer_param_specs(kind, dims)) p.tensors.emplace(spec.name, init_param<T>(spec, rng));
  return p;
}

template <std::floating_point T>
MixerParams<Tensor<T>> init_mixer_params(MixerKind kind, const Dimensions& dims, std::uint64_t seed) {
  Rng rng(seed);
  return init_mixer_params<T>(kind, dims, rng);
}

/// Graph leaves for every parameter, named `<prefix><name>`.
template <class T>
MixerParams<Expr> param_leaves(GraphBuilder& builder, const MixerParams<Tensor<T>>& params,
                               const std::string& prefix = "") {
  MixerParams<Expr> out{params.kind, params.dims, {}};
  for (const auto& [name, t] : params.tensors) out.tensors.emplace(name, builder.leaf(prefix + name, t.shape()));
  return out;
}

/// Per-token inputs to one head's state update.
template <class V>
struct TokenProjection {
  V q, k, v;
};

/// Gate values for one token and head; only the fields used by the kind are
/// populated. Scalars are shape [1].
template <class V>
struct GateSet {
  std::optional<V> alpha;         // per-channel decay (HGRN, GLA, RWKV6, HGRN2)
  std::optional<V> alpha_scalar;  // scalar decay (GatedDeltaNet)
  std::optional<V> beta;          // delta-rule write strength
  std::optional<V> gamma;         // fixed decay (RetNet)
  std::optional<V> gamma_t;       // data-dependent scalar decay (Mamba2)
  std::optional<V> r, i;          // Hawk recurrence and input gates
  std::optional<V> bonus;         // RWKV6 read-out vector
};

/// Whole-sequence projections: q/k/v and gate activations, one row per token.
template <class V>
struct SequenceProjection {
  V q, k, v;
  std::optional<V> alpha, r, i, beta, gamma_t;
};

namespace detail {

template <class V>
V affine(const V& x, const V& w, const V& b) {
  const std::size_t rows = x.shape()[0];
  const V ones = fill_like(x, Shape{rows, 1}, 1.0);
  return add(matmul(x, w), matmul(ones, b));
}

template <class V>
V gate(const V& x, const MixerParams<V>& p, const std::string& name) {
  return sigmoid(affine(x, p.get("w_" + name), p.get("b_" + name)));
}

}  // namespace detail

/// Projects rows of `x` (R x d_model) into q/k/v and gate activations.
template <class V>
SequenceProjection<V> project(const MixerParams<V>& p, const V& x) {
  SequenceProjection<V> out{matmul(x, p.get("wq")), matmul(x, p.get("wk")), matmul(x, p.get("wv")), {}, {}, {}, {},
                            {}};
  switch (p.kind) {
    case MixerKind::HGRN:
    case MixerKind::GLA:
    case MixerKind::RWKV6:
    case MixerKind::HGRN2: out.alpha = detail::gate(x, p, "alpha"); break;
    case MixerKind::Hawk:
      out.r = detail::gate(x, p, "r");
      out.i = detail::gate(x, p, "i");
      break;
    case MixerKind::RetNet: break;
    case MixerKind::Mamba2: out.gamma_t = detail::gate(x, p, "gamma"); break;
    case MixerKind::DeltaNet: out.beta = detail::gate(x, p, "beta"); break;
    case MixerKind::GatedDeltaNet:
      out.beta = detail::gate(x, p, "beta");
      out.alpha = detail::gate(x, p, "alpha");
      break;
  }
  return out;
}

/// L2-normalizes a key vector.
template <class V>
V normalize_key(const V& k) {
  return scale_by(rsqrt(sum(mul(k, k))), k);
}

/// q/k/v of token `row` restricted to `head`. Delta-family keys come out
/// unit-norm.
template <class V>
TokenProjection<V> token_projection(MixerKind kind, const SequenceProjection<V>& p, std::size_t row,
                                    std::size_t head, std::size_t d) {
  const std::size_t c0 = head * d, c1 = c0 + d;
  TokenProjection<V> out{mixerforge::row(p.q, row, c0, c1), mixerforge::row(p.k, row, c0, c1),
                         mixerforge::row(p.v, row, c0, c1)};
  if (is_delta_family(kind)) out.k = normalize_key(out.k);
  return out;
}

/// Gate values of token `row` for `head`.
template <class V>
GateSet<V> token_gates(const MixerParams<V>& params, const SequenceProjection<V>& p, std::size_t row,
                       std::size_t head) {
  const std::size_t d = params.dims.d;
  const std::size_t c0 = head * d, c1 = c0 + d;
  GateSet<V> g;
  switch (params.kind) {
    case MixerKind::HGRN:
    case MixerKind::GLA:
    case MixerKind::HGRN2: g.alpha = mixerforge::row(*p.alpha, row, c0, c1); break;
    case MixerKind::RWKV6:
      g.alpha = mixerforge::row(*p.alpha, row, c0, c1);
      g.bonus = mixerforge::row(params.get("bonus"), 0, c0, c1);
      break;
    case MixerKind::Hawk:
      g.r = mixerforge::row(*p.r, row, c0, c1);
      g.i = mixerforge::row(*p.i, row, c0, c1);
      break;
    case MixerKind::RetNet: g.gamma = mixerforge::row(params.get("gamma"), 0, head, head + 1); break;
    case MixerKind::Mamba2: g.gamma_t = mixerforge::row(*p.gamma_t, row, head, head + 1); break;
    case MixerKind::DeltaNet: g.beta = mixerforge::row(*p.beta, row, head, head + 1); break;
    case MixerKind::GatedDeltaNet:
      g.beta = mixerforge::row(*p.beta, row, head, head + 1);
      g.alpha_scalar = mixerforge::row(*p.alpha, row, head, head + 1);
      break;
  }
  return g;
}

/// Gates for a single input token x_t (length d_model), one GateSet per head.
/// Gates depend on x_t only.
template <std::floating_point T>
std::vector<GateSet<Tensor<T>>> compute_gates(const MixerParams<Tensor<T>>& params, const Tensor<T>& x_t) {
  if (x_t.numel() != params.dims.d_model)
    throw ShapeError("compute_gates: token has " + std::to_string(x_t.numel()) + " features, expected " +
                     std::to_string(params.dims.d_model));
  const Tensor<T> x = x_t.reshaped({1, x_t.numel()});
  const auto proj = project(params, x);
  std::vector<GateSet<Tensor<T>>> out;
  for (std::size_t h = 0; h < params.dims.H; ++h) out.push_back(token_gates(params, proj, 0, h));
  return out;
}

}  // namespace mixerforge

#pragma once

#include <functional>
#include <vector>

#include "mixerforge/mixers/step.hpp"

namespace mixerforge {

/// Everything one head consumes over a sequence, token by token.
template <class V>
struct HeadSequence {
  std::vector<TokenProjection<V>> tokens;
  std::vector<GateSet<V>> gates;

  [[nodiscard]] std::size_t length() const { return tokens.size(); }
};

/// Called after every step with the token index and the fresh state; may
/// modify the state.
template <class V>
using StepObserver = std::function<void(std::size_t, MixerState<V>&)>;

/// Per-head inputs for rows [row0, row0 + length) of a projected sequence.
template <class V>
std::vector<HeadSequence<V>> head_sequences(const MixerParams<V>& params, const SequenceProjection<V>& proj,
                                            std::size_t row0, std::size_t length) {
  std::vector<HeadSequence<V>> heads(params.dims.H);
  for (std::size_t h = 0; h < params.dims.H; ++h) {
    heads[h].tokens.reserve(length);
    heads[h].gates.reserve(length);
    for (std::size_t t = row0; t < row0 + length; ++t) {
      heads[h].tokens.push_back(token_projection(params.kind, proj, t, h, params.dims.d));
      heads[h].gates.push_back(token_gates(params, proj, t, h));
    }
  }
  return heads;
}

template <class V>
std::vector<HeadSequence<V>> head_sequences(const MixerParams<V>& params, const V& tokens) {
  if (tokens.shape().size() != 2 || tokens.shape()[1] != params.dims.d_model)
    throw ShapeError("scan: tokens must be L x d_model, got " + shape_string(tokens.shape()));
  return head_sequences(params, project(params, tokens), 0, tokens.shape()[0]);
}

/// Matrix-state kinds that map onto the fused recurrence primitive.
constexpr bool has_fused_scan(MixerKind kind) {
  return state_form(kind) == StateForm::Matrix && kind != MixerKind::RWKV6;
}

/// scan_head for rows [row0, row0 + length) of `head` as one fused
/// recurrence: decay kinds use e = 0, w = 1; delta kinds e = w = beta.
template <class V>
V fused_scan_head(const MixerParams<V>& params, const SequenceProjection<V>& proj, std::size_t row0,
                  std::size_t length, std::size_t head) {
  if (!has_fused_scan(params.kind)) throw ConfigError(std::string(to_string(params.kind)) + " has no fused scan");
  if (length == 0) throw ConfigError("scan: sequence length must be at least 1");
  const std::size_t d = params.dims.d, c0 = head * d, c1 = c0 + d, r1 = row0 + length;
  auto cols = [&](const V& m) { return slice(m, row0, r1, c0, c1); };
  auto col = [&](const V& m) { return slice(m, row0, r1, head, head + 1); };
  const V q = cols(proj.q), v = cols(proj.v);
  const V spread_row = fill_like(q, Shape{1, d}, 1.0);
  auto spread = [&](const V& c) { return matmul(c, spread_row); };
  const V zeros = fill_like(q, Shape{length, 1}, 0.0), ones = fill_like(q, Shape{length, 1}, 1.0);
  auto unit_rows = [&](const V& k) {
    return mul(k, spread(rsqrt(matmul(mul(k, k), fill_like(q, Shape{d, 1}, 1.0)))));
  };
  switch (params.kind) {
    case MixerKind::RetNet: {
      const V a = spread(matmul(ones, slice(params.get("gamma"), 0, 1, head, head + 1)));
      return recurrence(q, cols(proj.k), v, a, zeros, ones);
    }
    case MixerKind::GLA: return recurrence(q, cols(proj.k), v, cols(*proj.alpha), zeros, ones);
    case MixerKind::Mamba2: return recurrence(q, cols(proj.k), v, spread(col(*proj.gamma_t)), zeros, ones);
    case MixerKind::HGRN2: {
      const V a = cols(*proj.alpha);
      return recurrence(q, sub(fill_like(q, Shape{length, d}, 1.0), a), v, a, zeros, ones);
    }
    case MixerKind::DeltaNet: {
      const V beta = col(*proj.beta);
      return recurrence(q, unit_rows(cols(proj.k)), v, fill_like(q, Shape{length, d}, 1.0), beta, beta);
    }
    case MixerKind::GatedDeltaNet: {
      const V beta = col(*proj.beta);
      return recurrence(q, unit_rows(cols(proj.k)), v, spread(col(*proj.alpha)), beta, beta);
    }
    default: break;
  }
  throw ConfigError("unreachable");
}

/// Sequential recurrence over one head from the zero state; returns L x d.
template <class V>
V scan_head(MixerKind kind, const HeadSequence<V>& seq, const StepObserver<V>& observer = {}) {
  if (seq.length() == 0) throw ConfigError("scan: sequence length must be at least 1");
  if (seq.gates.size() != seq.length()) throw ShapeError("scan: one gate set per token required");
  const std::size_t d = seq.tokens.front().q.shape()[0];
  MixerState<V> state = zero_state(kind, d, seq.tokens.front().q);
  std::vector<V> outputs;
  outputs.reserve(seq.length());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    auto result = step(kind, state, seq.tokens[t], seq.gates[t]);
    state = std::move(result.state);
    if (observer) observer(t, state);
    outputs.push_back(std::move(result.output));
  }
  return concat_rows(outputs);
}

/// Runs the mixer over `tokens` (L x d_model); one L x d output per head.
template <class V>
std::vector<V> scan(const MixerParams<V>& params, const V& tokens) {
  params.dims.validate(params.kind);
  std::vector<V> out;
  for (const auto& head : head_sequences(params, tokens)) out.push_back(scan_head(params.kind, head));
  return out;
}

}  // namespace mixerforge

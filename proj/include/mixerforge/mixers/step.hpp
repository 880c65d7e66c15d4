#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "mixerforge/mixers/params.hpp"

namespace mixerforge {

/// Per-head recurrent state: h (length d) for Gen-1, S (d x d) otherwise.
template <class V>
struct MixerState {
  V value;
};

template <class V>
struct StepResult {
  MixerState<V> state;
  V output;
};

/// Zero state of the right form for `kind`.
template <std::floating_point T>
MixerState<Tensor<T>> init_state(MixerKind kind, const Dimensions& dims) {
  dims.validate(kind);
  if (state_form(kind) == StateForm::Vector) return {Tensor<T>(Shape{dims.d})};
  return {Tensor<T>(Shape{dims.d, dims.d})};
}

template <class V>
MixerState<V> zero_state(MixerKind kind, std::size_t d, const V& like) {
  if (state_form(kind) == StateForm::Vector) return {fill_like(like, Shape{d}, 0.0)};
  return {fill_like(like, Shape{d, d}, 0.0)};
}

namespace detail {

enum class Interval { Open, ClosedUnit, HalfOpen };  // (0,1), [0,1], (0,1]

template <class T>
void check_gate(const std::optional<Tensor<T>>& gate, const char* name, MixerKind kind, std::size_t width,
                Interval range) {
  if (!gate) throw InputError(std::string(to_string(kind)) + ": missing gate '" + name + "'");
  if (gate->numel() != width || gate->rank() != 1)
    throw ShapeError(std::string(to_string(kind)) + ": gate '" + name + "' has shape " +
                     shape_string(gate->shape()));
  for (T x : gate->data()) {
    const bool ok = range == Interval::Open         ? (x > T{0} && x < T{1})
                    : range == Interval::ClosedUnit ? (x >= T{0} && x <= T{1})
                                                    : (x > T{0} && x <= T{1});
    if (!ok)
      throw InputError(std::string(to_string(kind)) + ": gate '" + name + "' value " + std::to_string(x) +
                       " out of range");
  }
}

template <class T>
void check_absent(const std::optional<Tensor<T>>& gate, const char* name, MixerKind kind) {
  if (gate) throw InputError(std::string(to_string(kind)) + ": gate '" + name + "' does not apply");
}

template <class T>
T unit_norm_tolerance() {
  return std::is_same_v<T, double> ? T(1e-12) : T(1e-5);
}

template <class T>
void validate_step(MixerKind kind, const MixerState<Tensor<T>>& state, const TokenProjection<Tensor<T>>& p,
                   const GateSet<Tensor<T>>& g) {
  const std::size_t d = p.q.numel();
  for (const auto* t : {&p.q, &p.k, &p.v})
    if (t->rank() != 1 || t->numel() != d) throw ShapeError("step: q, k, v must be vectors of equal length");
  const Shape expected = state_form(kind) == StateForm::Vector ? Shape{d} : Shape{d, d};
  if (state.value.shape() != expected)
    throw ShapeError(std::string(to_string(kind)) + ": state shape " + shape_string(state.value.shape()) +
                     ", expected " + shape_string(expected));
  if (!p.q.all_finite() || !p.k.all_finite() || !p.v.all_finite() || !state.value.all_finite())
    throw NumericError(std::string(to_string(kind)) + ": non-finite step input");

  const bool per_channel_alpha = kind == MixerKind::HGRN || kind == MixerKind::GLA || kind == MixerKind::RWKV6 ||
                                 kind == MixerKind::HGRN2;
  if (per_channel_alpha) check_gate(g.alpha, "alpha", kind, d, Interval::Open);
  else check_absent(g.alpha, "alpha", kind);
  if (kind == MixerKind::Hawk) {
    check_gate(g.r, "r", kind, d, Interval::Open);
    check_gate(g.i, "i", kind, d, Interval::Open);
  } else {
    check_absent(g.r, "r", kind);
    check_absent(g.i, "i", kind);
  }
  if (kind == MixerKind::RetNet) check_gate(g.gamma, "gamma", kind, 1, Interval::Open);
  else check_absent(g.gamma, "gamma", kind);
  if (kind == MixerKind::Mamba2) check_gate(g.gamma_t, "gamma_t", kind, 1, Interval::Open);
  else check_absent(g.gamma_t, "gamma_t", kind);
  if (is_delta_family(kind)) check_gate(g.beta, "beta", kind, 1, Interval::ClosedUnit);
  else check_absent(g.beta, "beta", kind);
  if (kind == MixerKind::GatedDeltaNet) check_gate(g.alpha_scalar, "alpha_scalar", kind, 1, Interval::HalfOpen);
  else check_absent(g.alpha_scalar, "alpha_scalar", kind);
  if (kind == MixerKind::RWKV6) {
    if (!g.bonus || g.bonus->numel() != d) throw InputError("RWKV6: missing bonus vector");
  } else {
    check_absent(g.bonus, "bonus", kind);
  }

  if (is_delta_family(kind)) {
    T sq{0};
    for (T x : p.k.data()) sq += x * x;
    if (std::abs(std::sqrt(sq) - T{1}) > unit_norm_tolerance<T>())
      throw InputError(std::string(to_string(kind)) + ": key must be unit-norm, |k| = " +
                       std::to_string(std::sqrt(sq)));
  }
}

}  // namespace detail

/// One recurrent update and read-out for a single head.
///
///   HGRN    h' = a*h + (1-a)*v                      o = h'*q
///   Hawk    h' = r*h + i*v                          o = h'*q
///   RetNet  S' = g S + v k^T                        o = S' q
///   GLA     S' = S Diag(a) + v k^T                  o = S' q
///   Mamba2  S' = g_t S + v k^T                      o = S' q
///   RWKV6   S' = S Diag(a) + v k^T                  o = (S + (u*v) k^T) q
///   HGRN2   S' = S Diag(a) + v (1-a)^T              o = S' q
///   DeltaNet       S' = S (I - b k k^T) + b v k^T   o = S' q
///   GatedDeltaNet  S' = a S (I - b k k^T) + b v k^T o = S' q
///
/// The delta family is evaluated as S' = aS + b (v - aS k) k^T, which avoids
/// materializing the projector.
template <class V>
StepResult<V> step(MixerKind kind, const MixerState<V>& state, const TokenProjection<V>& p, const GateSet<V>& g) {
  if constexpr (is_tensor_v<V>) detail::validate_step(kind, state, p, g);
  const V& s = state.value;
  const std::size_t d = p.q.shape()[0];
  auto ones = [&] { return fill_like(p.q, Shape{d}, 1.0); };
  auto column_decay = [&](const V& alpha) { return mul(s, outer(ones(), alpha)); };

  switch (kind) {
    case MixerKind::HGRN: {
      V h = add(mul(*g.alpha, s), mul(sub(ones(), *g.alpha), p.v));
      V o = mul(h, p.q);
      return {{std::move(h)}, std::move(o)};
    }
    case MixerKind::Hawk: {
      V h = add(mul(*g.r, s), mul(*g.i, p.v));
      V o = mul(h, p.q);
      return {{std::move(h)}, std::move(o)};
    }
    case MixerKind::RetNet: {
      V next = add(scale_by(*g.gamma, s), outer(p.v, p.k));
      V o = matmul(next, p.q);
      return {{std::move(next)}, std::move(o)};
    }
    case MixerKind::GLA: {
      V next = add(column_decay(*g.alpha), outer(p.v, p.k));
      V o = matmul(next, p.q);
      return {{std::move(next)}, std::move(o)};
    }
    case MixerKind::Mamba2: {
      V next = add(scale_by(*g.gamma_t, s), outer(p.v, p.k));
      V o = matmul(next, p.q);
      return {{std::move(next)}, std::move(o)};
    }
    case MixerKind::RWKV6: {
      V o = matmul(add(s, outer(mul(*g.bonus, p.v), p.k)), p.q);
      V next = add(column_decay(*g.alpha), outer(p.v, p.k));
      return {{std::move(next)}, std::move(o)};
    }
    case MixerKind::HGRN2: {
      V next = add(column_decay(*g.alpha), outer(p.v, sub(ones(), *g.alpha)));
      V o = matmul(next, p.q);
      return {{std::move(next)}, std::move(o)};
    }
    case MixerKind::DeltaNet: {
      V next = add(s, outer(scale_by(*g.beta, sub(p.v, matmul(s, p.k))), p.k));
      V o = matmul(next, p.q);
      return {{std::move(next)}, std::move(o)};
    }
    case MixerKind::GatedDeltaNet: {
      V decayed = scale_by(*g.alpha_scalar, s);
      V next = add(decayed, outer(scale_by(*g.beta, sub(p.v, matmul(decayed, p.k))), p.k));
      V o = matmul(next, p.q);
      return {{std::move(next)}, std::move(o)};
    }
  }
  throw ConfigError("unknown mixer kind");
}

}  // namespace mixerforge

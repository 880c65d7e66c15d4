#pragma once

#include <vector>

#include "mixerforge/mixers/scan.hpp"

namespace mixerforge {

namespace chunk_detail {

/// A decay-family head reduced to the common form
///   S_t = S_{t-1} Diag(a_t) + v_t key_t^T
/// with an optional RWKV6 bonus read-out from the pre-update state.
template <class T>
struct DecayHead {
  std::size_t L = 0, d = 0;
  std::vector<T> q, key, v, decay;  // L x d, row-major
  std::vector<T> bonus;             // d, RWKV6 only
  bool lagged = false;
};

template <class T>
DecayHead<T> reduce(MixerKind kind, const HeadSequence<Tensor<T>>& seq) {
  DecayHead<T> h;
  h.L = seq.length();
  h.d = seq.tokens.front().q.numel();
  h.lagged = kind == MixerKind::RWKV6;
  for (std::size_t t = 0; t < h.L; ++t) {
    const auto& p = seq.tokens[t];
    const auto& g = seq.gates[t];
    h.q.insert(h.q.end(), p.q.data().begin(), p.q.data().end());
    h.v.insert(h.v.end(), p.v.data().begin(), p.v.data().end());
    for (std::size_t j = 0; j < h.d; ++j) {
      T a{};
      switch (kind) {
        case MixerKind::RetNet: a = (*g.gamma)[0]; break;
        case MixerKind::Mamba2: a = (*g.gamma_t)[0]; break;
        default: a = (*g.alpha)[j]; break;
      }
      h.decay.push_back(a);
      h.key.push_back(kind == MixerKind::HGRN2 ? T{1} - (*g.alpha)[j] : p.k[j]);
    }
    if (kind == MixerKind::RWKV6 && t == 0) h.bonus.assign(g.bonus->data().begin(), g.bonus->data().end());
  }
  return h;
}

template <class T>
Tensor<T> run(const DecayHead<T>& h, std::size_t chunk) {
  const std::size_t L = h.L, d = h.d;
  std::vector<T> state(d * d, T{0});  // state at the start of the current chunk
  std::vector<T> out(L * d, T{0});
  std::vector<T> prod(d);

  for (std::size_t c0 = 0; c0 < L; c0 += chunk) {
    const std::size_t c1 = std::min(L, c0 + chunk);
    for (std::size_t t = c0; t < c1; ++t) {
      const T* q = &h.q[t * d];
      T* o = &out[t * d];
      // Intra-chunk: contributions of s in [c0, last], decayed up to `last`.
      const std::size_t last_plus_one = h.lagged ? t : t + 1;
      std::fill(prod.begin(), prod.end(), T{1});
      for (std::size_t s = last_plus_one; s-- > c0;) {
        T w{0};
        for (std::size_t j = 0; j < d; ++j) w += h.key[s * d + j] * prod[j] * q[j];
        for (std::size_t i = 0; i < d; ++i) o[i] += w * h.v[s * d + i];
        for (std::size_t j = 0; j < d; ++j) prod[j] *= h.decay[s * d + j];
      }
      // Inter-chunk: boundary state decayed through the chunk prefix.
      for (std::size_t i = 0; i < d; ++i) {
        T acc{0};
        for (std::size_t j = 0; j < d; ++j) acc += state[i * d + j] * prod[j] * q[j];
        o[i] += acc;
      }
      if (h.lagged) {
        T kq{0};
        for (std::size_t j = 0; j < d; ++j) kq += h.key[t * d + j] * q[j];
        for (std::size_t i = 0; i < d; ++i) o[i] += h.bonus[i] * h.v[t * d + i] * kq;
      }
    }
    // Carry: S <- S Diag(prod_{c0..c1-1} a) + sum_s v_s (key_s * prod_{s+1..c1-1} a)^T
    std::fill(prod.begin(), prod.end(), T{1});
    std::vector<T> next(d * d, T{0});
    for (std::size_t s = c1; s-- > c0;) {
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) next[i * d + j] += h.v[s * d + i] * h.key[s * d + j] * prod[j];
      for (std::size_t j = 0; j < d; ++j) prod[j] *= h.decay[s * d + j];
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) next[i * d + j] += state[i * d + j] * prod[j];
    state = std::move(next);
  }
  Tensor<T> result(Shape{L, d}, std::move(out));
  if (!result.all_finite()) throw NumericError("scan_chunked: non-finite output");
  return result;
}

inline void require_decay_family(MixerKind kind, std::size_t chunk) {
  if (!is_decay_family(kind))
    throw ConfigError(std::string("scan_chunked supports RetNet, GLA, Mamba2, RWKV6 and HGRN2; got ") +
                      std::string(to_string(kind)));
  if (chunk == 0) throw ConfigError("scan_chunked: chunk must be positive");
}

}  // namespace chunk_detail

/// Chunked evaluation of a decay-family head: quadratic form inside each
/// chunk, decayed boundary state carried between chunks.
template <std::floating_point T>
Tensor<T> scan_chunked_head(MixerKind kind, const HeadSequence<Tensor<T>>& seq, std::size_t chunk) {
  chunk_detail::require_decay_family(kind, chunk);
  if (seq.length() == 0) throw ConfigError("scan_chunked: sequence length must be at least 1");
  for (std::size_t t = 0; t < seq.length(); ++t) detail::validate_step(kind, MixerState<Tensor<T>>{
      Tensor<T>(Shape{seq.tokens[t].q.numel(), seq.tokens[t].q.numel()})}, seq.tokens[t], seq.gates[t]);
  return chunk_detail::run(chunk_detail::reduce(kind, seq), chunk);
}

template <std::floating_point T>
std::vector<Tensor<T>> scan_chunked(const MixerParams<Tensor<T>>& params, const Tensor<T>& tokens,
                                    std::size_t chunk) {
  chunk_detail::require_decay_family(params.kind, chunk);
  params.dims.validate(params.kind);
  std::vector<Tensor<T>> out;
  for (const auto& head : head_sequences(params, tokens)) out.push_back(scan_chunked_head(params.kind, head, chunk));
  return out;
}

}  // namespace mixerforge

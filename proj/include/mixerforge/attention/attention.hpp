#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mixerforge/numerics/graph.hpp"
#include "mixerforge/numerics/ops.hpp"

namespace mixerforge {

/// softmax(Q K^T / sqrt(d)) V with a strict causal mask; Q, K, V are L x d.
template <class V>
V causal_attention(const V& q, const V& k, const V& v) {
  const auto& qs = q.shape();
  if (qs.size() != 2 || k.shape() != qs || v.shape() != qs)
    throw ShapeError("causal_attention: Q, K, V must share an L x d shape");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(qs[1]));
  const V weights = row_softmax(scale(matmul(q, transpose(k)), inv_sqrt_d), /*causal=*/true);
  return matmul(weights, v);
}

/// Keys and values seen so far by one head of one full-attention layer.
template <std::floating_point T>
class HeadCache {
 public:
  [[nodiscard]] std::size_t length() const { return keys_.size(); }
  [[nodiscard]] const std::vector<Tensor<T>>& keys() const { return keys_; }
  [[nodiscard]] const std::vector<Tensor<T>>& values() const { return values_; }

  void append(Tensor<T> k, Tensor<T> v) {
    if (!keys_.empty() && (k.shape() != keys_.front().shape() || v.shape() != values_.front().shape()))
      throw ShapeError("HeadCache: key/value width changed");
    keys_.push_back(std::move(k));
    values_.push_back(std::move(v));
  }

 private:
  std::vector<Tensor<T>> keys_, values_;
};

/// Per-layer, per-head KV cache of a stack. Only layers registered as full
/// attention own a slot; recurrent layers never touch it.
template <std::floating_point T>
class KVCache {
 public:
  KVCache() = default;
  KVCache(std::size_t layers, std::size_t heads) : heads_(layers, std::vector<HeadCache<T>>(heads)) {}

  [[nodiscard]] std::size_t layers() const { return heads_.size(); }
  HeadCache<T>& at(std::size_t layer, std::size_t head) { return heads_.at(layer).at(head); }
  const HeadCache<T>& at(std::size_t layer, std::size_t head) const { return heads_.at(layer).at(head); }

  /// Tokens held by the longest head cache; equals the number of decoded
  /// tokens once any full-attention layer has run.
  [[nodiscard]] std::size_t length() const {
    std::size_t n = 0;
    for (const auto& layer : heads_)
      for (const auto& h : layer) n = std::max(n, h.length());
    return n;
  }

  /// Cached scalars across all layers and heads (keys plus values).
  [[nodiscard]] std::size_t stored_elements() const {
    std::size_t total = 0;
    for (const auto& layer : heads_)
      for (const auto& h : layer)
        for (std::size_t i = 0; i < h.length(); ++i) total += h.keys()[i].numel() + h.values()[i].numel();
    return total;
  }

 private:
  std::vector<std::vector<HeadCache<T>>> heads_;
};

/// Appends (k, v) and returns the attention output for query q over the full
/// history, i.e. the last row of causal_attention on the replayed sequence.
template <std::floating_point T>
Tensor<T> decode_step(HeadCache<T>& cache, const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v) {
  if (q.rank() != 1 || k.shape() != q.shape() || v.shape() != q.shape())
    throw ShapeError("decode_step: q, k, v must be vectors of equal length");
  cache.append(k, v);
  const std::size_t n = cache.length(), d = q.numel();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor<T> scores(Shape{n});
  for (std::size_t s = 0; s < n; ++s) {
    T dot{0};
    for (std::size_t j = 0; j < d; ++j) dot += q[j] * cache.keys()[s][j];
    scores[s] = static_cast<T>(dot * inv_sqrt_d);
  }
  const Tensor<T> weights = row_softmax(scores);
  Tensor<T> out(Shape{d});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < d; ++j) out[j] += weights[s] * cache.values()[s][j];
  return out;
}

}  // namespace mixerforge

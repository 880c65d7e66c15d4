#pragma once

#include <cmath>
#include <vector>

#include "mixerforge/mixers/scan.hpp"

// Reference implementation of every mixer as an explicit O(L^2) sum over
// prefixes. It shares nothing with the recurrent path beyond the input
// containers: projections, gates and the unrolled sums are all recomputed
// here with plain loops.

namespace mixerforge {

namespace oracle_detail {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major d x d

struct PlainHead {
  std::size_t L = 0, d = 0;
  std::vector<Vec> q, k, v, alpha, r, i;
  Vec beta, gamma, gamma_t, alpha_scalar;
  Vec bonus;
};

inline Vec to_vec(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

inline PlainHead from_sequence(const HeadSequence<Tensor<double>>& seq) {
  PlainHead h;
  h.L = seq.length();
  h.d = seq.tokens.front().q.numel();
  for (std::size_t t = 0; t < h.L; ++t) {
    const auto& p = seq.tokens[t];
    const auto& g = seq.gates[t];
    h.q.push_back(to_vec(p.q));
    h.k.push_back(to_vec(p.k));
    h.v.push_back(to_vec(p.v));
    if (g.alpha) h.alpha.push_back(to_vec(*g.alpha));
    if (g.r) h.r.push_back(to_vec(*g.r));
    if (g.i) h.i.push_back(to_vec(*g.i));
    if (g.beta) h.beta.push_back((*g.beta)[0]);
    if (g.gamma) h.gamma.push_back((*g.gamma)[0]);
    if (g.gamma_t) h.gamma_t.push_back((*g.gamma_t)[0]);
    if (g.alpha_scalar) h.alpha_scalar.push_back((*g.alpha_scalar)[0]);
    if (g.bonus && t == 0) h.bonus = to_vec(*g.bonus);
  }
  return h;
}

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  return s;
}

inline double naive_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Row t of x times columns [c0, c0 + width) of w (+ bias).
inline Vec naive_affine(const Tensor<double>& x, std::size_t t, const Tensor<double>& w, std::size_t c0,
                        std::size_t width, const Tensor<double>* bias) {
  const std::size_t in = x.cols();
  Vec out(width, 0.0);
  for (std::size_t c = 0; c < width; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < in; ++i) s += x.at(t, i) * w.at(i, c0 + c);
    out[c] = bias ? s + bias->at(0, c0 + c) : s;
  }
  return out;
}

inline PlainHead from_params(const MixerParams<Tensor<double>>& p, const Tensor<double>& x, std::size_t head) {
  const std::size_t d = p.dims.d, c0 = head * d;
  PlainHead h;
  h.L = x.rows();
  h.d = d;
  auto gate = [&](const char* name, std::size_t t, std::size_t col, std::size_t width) {
    const auto& b = p.get(std::string("b_") + name);
    Vec z = naive_affine(x, t, p.get(std::string("w_") + name), col, width, &b);
    for (auto& e : z) e = naive_sigmoid(e);
    return z;
  };
  for (std::size_t t = 0; t < h.L; ++t) {
    h.q.push_back(naive_affine(x, t, p.get("wq"), c0, d, nullptr));
    h.k.push_back(naive_affine(x, t, p.get("wk"), c0, d, nullptr));
    h.v.push_back(naive_affine(x, t, p.get("wv"), c0, d, nullptr));
    if (is_delta_family(p.kind)) {
      const double norm = std::sqrt(dot(h.k.back(), h.k.back()));
      for (auto& e : h.k.back()) e /= norm;
    }
    switch (p.kind) {
      case MixerKind::HGRN:
      case MixerKind::GLA:
      case MixerKind::RWKV6:
      case MixerKind::HGRN2: h.alpha.push_back(gate("alpha", t, c0, d)); break;
      case MixerKind::Hawk:
        h.r.push_back(gate("r", t, c0, d));
        h.i.push_back(gate("i", t, c0, d));
        break;
      case MixerKind::RetNet: h.gamma.push_back(p.get("gamma").at(0, head)); break;
      case MixerKind::Mamba2: h.gamma_t.push_back(gate("gamma", t, head, 1)[0]); break;
      case MixerKind::DeltaNet: h.beta.push_back(gate("beta", t, head, 1)[0]); break;
      case MixerKind::GatedDeltaNet:
        h.beta.push_back(gate("beta", t, head, 1)[0]);
        h.alpha_scalar.push_back(gate("alpha", t, head, 1)[0]);
        break;
    }
  }
  if (p.kind == MixerKind::RWKV6) {
    const auto& u = p.get("bonus");
    h.bonus.assign(u.data().begin() + static_cast<std::ptrdiff_t>(c0),
                   u.data().begin() + static_cast<std::ptrdiff_t>(c0 + d));
  }
  return h;
}

/// o_t = sum_{s<=t} v_s * sum_j key_s[j] * prod_{u=s+1..t} decay_u[j] * q_t[j]
/// where decay_u is the per-channel gate; `readout_lag` = 1 stops the sum
/// and the decay product at t-1 (RWKV6).
inline Vec gated_outer_sum(const PlainHead& h, const std::vector<Vec>& key, const std::vector<Vec>& decay,
                           std::size_t t, std::size_t readout_lag) {
  Vec o(h.d, 0.0);
  if (t < readout_lag) return o;
  const std::size_t last = t - readout_lag;
  for (std::size_t s = 0; s <= last; ++s) {
    double weight = 0.0;
    for (std::size_t j = 0; j < h.d; ++j) {
      double prod = 1.0;
      for (std::size_t u = s + 1; u <= last; ++u) prod *= decay[u][j];
      weight += key[s][j] * prod * h.q[t][j];
    }
    for (std::size_t i = 0; i < h.d; ++i) o[i] += weight * h.v[s][i];
  }
  return o;
}

inline Mat zeros(std::size_t d) { return Mat(d, Vec(d, 0.0)); }

inline Mat matmul(const Mat& a, const Mat& b) {
  const std::size_t d = a.size();
  Mat c = zeros(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < d; ++p) s += a[i][p] * b[p][j];
      c[i][j] = s;
    }
  return c;
}

inline std::vector<Vec> unrolled(MixerKind kind, const PlainHead& h) {
  const std::size_t L = h.L, d = h.d;
  std::vector<Vec> out(L, Vec(d, 0.0));
  switch (kind) {
    case MixerKind::HGRN:
    case MixerKind::Hawk: {
      const auto& decay = kind == MixerKind::HGRN ? h.alpha : h.r;
      for (std::size_t t = 0; t < L; ++t)
        for (std::size_t j = 0; j < d; ++j) {
          double acc = 0.0;
          for (std::size_t s = 0; s <= t; ++s) {
            double prod = 1.0;
            for (std::size_t u = s + 1; u <= t; ++u) prod *= decay[u][j];
            const double input = kind == MixerKind::HGRN ? (1.0 - h.alpha[s][j]) * h.v[s][j] : h.i[s][j] * h.v[s][j];
            acc += prod * input;
          }
          out[t][j] = acc * h.q[t][j];
        }
      return out;
    }
    case MixerKind::RetNet: {
      const double gamma = h.gamma.front();
      for (std::size_t t = 0; t < L; ++t)
        for (std::size_t s = 0; s <= t; ++s) {
          const double w = std::pow(gamma, static_cast<double>(t - s)) * dot(h.k[s], h.q[t]);
          for (std::size_t i = 0; i < d; ++i) out[t][i] += w * h.v[s][i];
        }
      return out;
    }
    case MixerKind::Mamba2: {
      for (std::size_t t = 0; t < L; ++t)
        for (std::size_t s = 0; s <= t; ++s) {
          double prod = 1.0;
          for (std::size_t u = s + 1; u <= t; ++u) prod *= h.gamma_t[u];
          const double w = prod * dot(h.k[s], h.q[t]);
          for (std::size_t i = 0; i < d; ++i) out[t][i] += w * h.v[s][i];
        }
      return out;
    }
    case MixerKind::GLA:
      for (std::size_t t = 0; t < L; ++t) out[t] = gated_outer_sum(h, h.k, h.alpha, t, 0);
      return out;
    case MixerKind::HGRN2: {
      std::vector<Vec> key(L, Vec(d));
      for (std::size_t s = 0; s < L; ++s)
        for (std::size_t j = 0; j < d; ++j) key[s][j] = 1.0 - h.alpha[s][j];
      for (std::size_t t = 0; t < L; ++t) out[t] = gated_outer_sum(h, key, h.alpha, t, 0);
      return out;
    }
    case MixerKind::RWKV6:
      for (std::size_t t = 0; t < L; ++t) {
        out[t] = gated_outer_sum(h, h.k, h.alpha, t, 1);
        const double kq = dot(h.k[t], h.q[t]);
        for (std::size_t i = 0; i < d; ++i) out[t][i] += h.bonus[i] * h.v[t][i] * kq;
      }
      return out;
    case MixerKind::DeltaNet:
    case MixerKind::GatedDeltaNet: {
      // Transition matrices a_u (I - b_u k_u k_u^T), materialized densely.
      std::vector<Mat> transition(L, zeros(d));
      for (std::size_t u = 0; u < L; ++u) {
        const double a = kind == MixerKind::GatedDeltaNet ? h.alpha_scalar[u] : 1.0;
        for (std::size_t i = 0; i < d; ++i)
          for (std::size_t j = 0; j < d; ++j)
            transition[u][i][j] = a * ((i == j ? 1.0 : 0.0) - h.beta[u] * h.k[u][i] * h.k[u][j]);
      }
      for (std::size_t t = 0; t < L; ++t) {
        Mat state = zeros(d);
        for (std::size_t s = 0; s <= t; ++s) {
          Mat term = zeros(d);
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) term[i][j] = h.beta[s] * h.v[s][i] * h.k[s][j];
          for (std::size_t u = s + 1; u <= t; ++u) term = matmul(term, transition[u]);
          for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) state[i][j] += term[i][j];
        }
        for (std::size_t i = 0; i < d; ++i) out[t][i] = dot(state[i], h.q[t]);
      }
      return out;
    }
  }
  return out;
}

inline Tensor<double> to_tensor(const std::vector<Vec>& rows) {
  std::vector<double> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  return Tensor<double>(Shape{rows.size(), rows.front().size()}, std::move(data));
}

}  // namespace oracle_detail

/// Unrolled reference output (L x d) for one head's explicit inputs.
inline Tensor<double> oracle_unrolled(MixerKind kind, const HeadSequence<Tensor<double>>& seq) {
  return oracle_detail::to_tensor(oracle_detail::unrolled(kind, oracle_detail::from_sequence(seq)));
}

/// Unrolled reference output per head for `tokens` (L x d_model), computing
/// projections and gates from `params` independently of `project()`.
inline std::vector<Tensor<double>> oracle_unrolled(const MixerParams<Tensor<double>>& params,
                                                   const Tensor<double>& tokens) {
  std::vector<Tensor<double>> out;
  for (std::size_t h = 0; h < params.dims.H; ++h)
    out.push_back(oracle_detail::to_tensor(
        oracle_detail::unrolled(params.kind, oracle_detail::from_params(params, tokens, h))));
  return out;
}

}  // namespace mixerforge

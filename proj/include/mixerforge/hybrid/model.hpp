#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "mixerforge/attention/attention.hpp"
#include "mixerforge/hybrid/config.hpp"
#include "mixerforge/mixers/scan.hpp"

namespace mixerforge {

inline constexpr double kRmsNormEps = 1e-5;

template <class V>
using NamedTensors = std::map<std::string, V, std::less<>>;

inline std::string layer_prefix(std::size_t layer) { return "layer" + std::to_string(layer) + "."; }

/// Every trainable tensor of the network, in a fixed order.
///
///   embed, pos                         token and absolute position tables
///   layer<i>.norm1 / norm2             RMSNorm gains
///   layer<i>.mixer.*                   LINEAR layers: mixer parameters
///   layer<i>.attn.wq / wk / wv         FULL layers
///   layer<i>.wo                        token-mixer output projection
///   layer<i>.mlp.w_gate / w_up / w_down
///   final_norm, head
inline std::vector<ParamSpec> model_param_specs(const HybridConfig& config) {
  config.validate();
  const std::size_t dm = config.d_model, hidden = config.mlp_mult * dm;
  std::vector<ParamSpec> specs = {
      {"embed", {config.vocab, dm}, ParamInit::Weight, dm},
      {"pos", {config.max_len, dm}, ParamInit::Weight, dm},
  };
  const auto schedule = build_schedule(config);
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const std::string pre = layer_prefix(i);
    specs.push_back({pre + "norm1", {1, dm}, ParamInit::Ones, 1});
    if (schedule[i] == LayerKind::Linear) {
      for (auto spec : mixer_param_specs(config.kind, config.dims())) {
        spec.name = pre + "mixer." + spec.name;
        specs.push_back(std::move(spec));
      }
    } else {
      for (const char* name : {"wq", "wk", "wv"}) specs.push_back({pre + "attn." + name, {dm, dm}, ParamInit::Weight, dm});
    }
    specs.push_back({pre + "wo", {dm, dm}, ParamInit::Weight, dm});
    specs.push_back({pre + "norm2", {1, dm}, ParamInit::Ones, 1});
    specs.push_back({pre + "mlp.w_gate", {dm, hidden}, ParamInit::Weight, dm});
    specs.push_back({pre + "mlp.w_up", {dm, hidden}, ParamInit::Weight, dm});
    specs.push_back({pre + "mlp.w_down", {hidden, dm}, ParamInit::Weight, hidden});
  }
  specs.push_back({"final_norm", {1, dm}, ParamInit::Ones, 1});
  specs.push_back({"head", {dm, config.vocab}, ParamInit::Weight, dm});
  return specs;
}

template <class V>
const V& lookup(const NamedTensors<V>& params, std::string_view name) {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("missing model parameter '" + std::string(name) + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// Building blocks, generic over Tensor<T> and Expr.

/// Row-wise x / rms(x) * gain for x (R x D), gain (1 x D).
template <class V>
V rms_norm(const V& x, const V& gain) {
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  const V mean_sq = scale(matmul(mul(x, x), fill_like(x, Shape{cols, 1}, 1.0)), 1.0 / static_cast<double>(cols));
  const V inv = rsqrt(add(mean_sq, fill_like(x, Shape{rows, 1}, kRmsNormEps)));
  const V normed = mul(x, matmul(inv, fill_like(x, Shape{1, cols}, 1.0)));
  return mul(normed, matmul(fill_like(x, Shape{rows, 1}, 1.0), gain));
}

/// (silu(x W_gate) * (x W_up)) W_down
template <class V>
V gated_mlp(const V& x, const V& w_gate, const V& w_up, const V& w_down) {
  const V g = matmul(x, w_gate);
  return matmul(mul(mul(g, sigmoid(g)), matmul(x, w_up)), w_down);
}

/// Multi-head causal attention over `batch` stacked sequences of `length`
/// rows each; x is (batch*length) x d_model. Output before W_o.
template <class V>
V attention_heads(const V& x, const V& wq, const V& wk, const V& wv, std::size_t heads, std::size_t batch,
                  std::size_t length) {
  const V q = matmul(x, wq), k = matmul(x, wk), v = matmul(x, wv);
  const std::size_t d = x.shape()[1] / heads;
  std::vector<V> per_head;
  for (std::size_t h = 0; h < heads; ++h) {
    std::vector<V> rows;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t r0 = b * length, r1 = r0 + length, c0 = h * d, c1 = c0 + d;
      rows.push_back(causal_attention(slice(q, r0, r1, c0, c1), slice(k, r0, r1, c0, c1), slice(v, r0, r1, c0, c1)));
    }
    per_head.push_back(concat_rows(rows));
  }
  return concat_cols(per_head);
}

/// Recurrent mixer over `batch` stacked sequences; output before W_o.
template <class V>
V mixer_heads(const MixerParams<V>& params, const V& x, std::size_t batch, std::size_t length) {
  const auto proj = project(params, x);
  std::vector<std::vector<V>> rows(params.dims.H);
  for (std::size_t b = 0; b < batch; ++b) {
    if (has_fused_scan(params.kind)) {
      for (std::size_t h = 0; h < params.dims.H; ++h)
        rows[h].push_back(fused_scan_head(params, proj, b * length, length, h));
      continue;
    }
    auto heads = head_sequences(params, proj, b * length, length);
    for (std::size_t h = 0; h < params.dims.H; ++h) rows[h].push_back(scan_head(params.kind, heads[h]));
  }
  std::vector<V> per_head;
  for (auto& r : rows) per_head.push_back(concat_rows(r));
  return concat_cols(per_head);
}

template <class V>
MixerParams<V> layer_mixer_params(const HybridConfig& config, const NamedTensors<V>& params, std::size_t layer) {
  MixerParams<V> out{config.kind, config.dims(), {}};
  const std::string pre = layer_prefix(layer) + "mixer.";
  for (const auto& spec : mixer_param_specs(config.kind, config.dims()))
    out.tensors.emplace(spec.name, lookup(params, pre + spec.name));
  return out;
}

/// One pre-norm block: token mixer (per schedule) then gated MLP, each with
/// a residual connection.
template <class V>
V hybrid_block(const HybridConfig& config, LayerKind kind, const NamedTensors<V>& params, std::size_t layer,
               const V& x, std::size_t batch, std::size_t length) {
  const std::string pre = layer_prefix(layer);
  const V h = rms_norm(x, lookup(params, pre + "norm1"));
  const V mixed = kind == LayerKind::Linear
                      ? mixer_heads(layer_mixer_params(config, params, layer), h, batch, length)
                      : attention_heads(h, lookup(params, pre + "attn.wq"), lookup(params, pre + "attn.wk"),
                                        lookup(params, pre + "attn.wv"), config.heads, batch, length);
  const V y = add(x, matmul(mixed, lookup(params, pre + "wo")));
  const V m = gated_mlp(rms_norm(y, lookup(params, pre + "norm2")), lookup(params, pre + "mlp.w_gate"),
                        lookup(params, pre + "mlp.w_up"), lookup(params, pre + "mlp.w_down"));
  return add(y, m);
}

/// One-hot rows selecting positions 0..length-1 for each of `batch` sequences.
inline Tensor<double> position_selector(std::size_t batch, std::size_t length, std::size_t max_len) {
  Tensor<double> out(Shape{batch * length, max_len});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < length; ++t) out.at(b * length + t, t) = 1.0;
  return out;
}

/// Logits ((batch*length) x vocab) for one-hot tokens ((batch*length) x vocab).
template <class V>
V hybrid_logits(const HybridConfig& config, const LayerSchedule& schedule, const NamedTensors<V>& params,
                const V& tokens_one_hot, std::size_t batch, std::size_t length) {
  if (length == 0 || length > config.max_len)
    throw InputError("sequence length " + std::to_string(length) + " outside [1, " + std::to_string(config.max_len) +
                     "]");
  const V positions = constant_like(tokens_one_hot, position_selector(batch, length, config.max_len));
  V x = add(matmul(tokens_one_hot, lookup(params, "embed")), matmul(positions, lookup(params, "pos")));
  for (std::size_t i = 0; i < schedule.size(); ++i) x = hybrid_block(config, schedule[i], params, i, x, batch, length);
  return matmul(rms_norm(x, lookup(params, "final_norm")), lookup(params, "head"));
}

template <std::floating_point T>
Tensor<T> one_hot(std::span<const int> tokens, std::size_t vocab) {
  if (tokens.empty()) throw InputError("empty token sequence");
  Tensor<T> out(Shape{tokens.size(), vocab});
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= vocab)
      throw InputError("token id " + std::to_string(tokens[t]) + " outside vocabulary of " + std::to_string(vocab));
    out.at(t, static_cast<std::size_t>(tokens[t])) = T{1};
  }
  return out;
}

// ---------------------------------------------------------------------------

/// Embedding, scheduled token-mixer blocks and projection head.
template <std::floating_point T>
class HybridModel {
 public:
  using Params = NamedTensors<Tensor<T>>;

  HybridModel(HybridConfig config, std::uint64_t seed) : config_(config), schedule_(build_schedule(config)) {
    Rng rng(seed);
    for (const auto& spec : model_param_specs(config_)) params_.emplace(spec.name, init_param<T>(spec, rng));
  }

  HybridModel(HybridConfig config, Params params)
      : config_(config), schedule_(build_schedule(config)), params_(std::move(params)) {
    const auto specs = model_param_specs(config_);
    if (specs.size() != params_.size())
      throw ConfigError("expected " + std::to_string(specs.size()) + " parameter tensors, got " +
                        std::to_string(params_.size()));
    for (const auto& spec : specs)
      if (lookup(params_, spec.name).shape() != spec.shape)
        throw ShapeError("parameter '" + spec.name + "' has shape " +
                         shape_string(params_.find(spec.name)->second.shape()) + ", expected " +
                         shape_string(spec.shape));
  }

  [[nodiscard]] const HybridConfig& config() const { return config_; }
  [[nodiscard]] const LayerSchedule& schedule() const { return schedule_; }
  [[nodiscard]] const Params& params() const { return params_; }
  Params& params() { return params_; }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
  }

  /// L x vocab logits for one sequence.
  [[nodiscard]] Tensor<T> forward(std::span<const int> tokens) const {
    return hybrid_logits(config_, schedule_, params_, one_hot<T>(tokens, config_.vocab), 1, tokens.size());
  }

  /// (B*L) x vocab logits for B sequences of equal length L.
  [[nodiscard]] Tensor<T> forward_batch(const std::vector<std::vector<int>>& sequences) const {
    if (sequences.empty()) throw InputError("empty batch");
    const std::size_t L = sequences.front().size();
    std::vector<int> flat;
    for (const auto& s : sequences) {
      if (s.size() != L) throw InputError("batch sequences must share one length");
      flat.insert(flat.end(), s.begin(), s.end());
    }
    return hybrid_logits(config_, schedule_, params_, one_hot<T>(flat, config_.vocab), sequences.size(), L);
  }

 private:
  HybridConfig config_;
  LayerSchedule schedule_;
  Params params_;
};

/// Graph of the summed weighted negative log-likelihood for a fixed
/// (batch, length). Leaves: every model parameter by name, `tokens`
/// (one-hot inputs) and `targets` (per-row target weights, zero rows for
/// ignored positions).
struct TrainingGraph {
  Graph graph;
  NodeId logits = 0;
  std::size_t batch = 0, length = 0;
};

inline TrainingGraph build_training_graph(const HybridConfig& config, std::size_t batch, std::size_t length) {
  GraphBuilder b;
  NamedTensors<Expr> params;
  for (const auto& spec : model_param_specs(config)) params.emplace(spec.name, b.leaf(spec.name, spec.shape));
  const Shape rows{batch * length, config.vocab};
  const Expr tokens = b.leaf("tokens", rows);
  const Expr targets = b.leaf("targets", rows);
  const Expr logits = hybrid_logits(config, build_schedule(config), params, tokens, batch, length);
  const Expr loss = scale(sum(mul(targets, log_softmax(logits))), -1.0);
  const std::vector<Expr> outputs{logits};
  return {b.build(loss, outputs), logits.id, batch, length};
}

}  // namespace mixerforge

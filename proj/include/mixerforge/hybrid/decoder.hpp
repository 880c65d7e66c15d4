#pragma once

#include <vector>

#include "mixerforge/hybrid/model.hpp"

namespace mixerforge {

/// Token-by-token inference. LINEAR layers carry a fixed-size state per
/// head; FULL layers append to the KV cache.
template <std::floating_point T>
class Decoder {
 public:
  explicit Decoder(const HybridModel<T>& model)
      : model_(&model), cache_(model.schedule().size(), model.config().heads), states_(model.schedule().size()) {
    const auto& cfg = model.config();
    for (std::size_t i = 0; i < model.schedule().size(); ++i) {
      if (model.schedule()[i] != LayerKind::Linear) continue;
      mixers_.push_back(layer_mixer_params(cfg, model.params(), i));
      for (std::size_t h = 0; h < cfg.heads; ++h) states_[i].push_back(init_state<T>(cfg.kind, cfg.dims()));
    }
  }

  [[nodiscard]] std::size_t position() const { return position_; }
  [[nodiscard]] const KVCache<T>& cache() const { return cache_; }

  /// Scalars held by LINEAR-layer states; does not depend on position.
  [[nodiscard]] std::size_t state_elements() const {
    std::size_t n = 0;
    for (const auto& layer : states_)
      for (const auto& s : layer) n += s.value.numel();
    return n;
  }

  /// Consumes one token and returns its logits row (length vocab).
  Tensor<T> next(int token) {
    const auto& cfg = model_->config();
    const auto& params = model_->params();
    if (position_ >= cfg.max_len) throw InputError("decoder exceeded max_len " + std::to_string(cfg.max_len));
    const int one[] = {token};
    Tensor<T> x = add(matmul(one_hot<T>(one, cfg.vocab), lookup(params, "embed")),
                      slice(lookup(params, "pos"), position_, position_ + 1, 0, cfg.d_model));
    std::size_t linear_index = 0;
    for (std::size_t i = 0; i < model_->schedule().size(); ++i) {
      const std::string pre = layer_prefix(i);
      const Tensor<T> h = rms_norm(x, lookup(params, pre + "norm1"));
      std::vector<Tensor<T>> heads;
      if (model_->schedule()[i] == LayerKind::Linear) {
        const auto& mp = mixers_[linear_index++];
        const auto proj = project(mp, h);
        for (std::size_t k = 0; k < cfg.heads; ++k) {
          auto r = step(cfg.kind, states_[i][k], token_projection(cfg.kind, proj, 0, k, mp.dims.d),
                        token_gates(mp, proj, 0, k));
          states_[i][k] = std::move(r.state);
          heads.push_back(r.output.reshaped({1, mp.dims.d}));
        }
      } else {
        const Tensor<T> q = matmul(h, lookup(params, pre + "attn.wq"));
        const Tensor<T> k = matmul(h, lookup(params, pre + "attn.wk"));
        const Tensor<T> v = matmul(h, lookup(params, pre + "attn.wv"));
        const std::size_t d = cfg.d_model / cfg.heads;
        for (std::size_t j = 0; j < cfg.heads; ++j) {
          const std::size_t c0 = j * d, c1 = c0 + d;
          heads.push_back(decode_step(cache_.at(i, j), row(q, 0, c0, c1), row(k, 0, c0, c1), row(v, 0, c0, c1))
                              .reshaped({1, d}));
        }
      }
      const Tensor<T> y = add(x, matmul(concat_cols(heads), lookup(params, pre + "wo")));
      x = add(y, gated_mlp(rms_norm(y, lookup(params, pre + "norm2")), lookup(params, pre + "mlp.w_gate"),
                           lookup(params, pre + "mlp.w_up"), lookup(params, pre + "mlp.w_down")));
    }
    ++position_;
    return row(matmul(rms_norm(x, lookup(params, "final_norm")), lookup(params, "head")), 0, 0, cfg.vocab);
  }

 private:
  const HybridModel<T>* model_;
  KVCache<T> cache_;
  std::vector<std::vector<MixerState<Tensor<T>>>> states_;
  std::vector<MixerParams<Tensor<T>>> mixers_;
  std::size_t position_ = 0;
};

}  // namespace mixerforge

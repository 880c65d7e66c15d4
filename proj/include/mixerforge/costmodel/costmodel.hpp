#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

#include "mixerforge/hybrid/config.hpp"

// Forward-pass token-mixer FLOPs, per layer, summed over heads. Projections,
// MLPs, norms and embeddings are not counted.

namespace mixerforge {

enum class CostClass { Vector, Matrix, Softmax };

struct MixerCostClass {
  CostClass cls = CostClass::Vector;
  std::uint64_t k = 0;  // matrix passes per token; 0 otherwise
};

constexpr MixerCostClass cost_class(MixerKind kind) {
  switch (kind) {
    case MixerKind::HGRN:
    case MixerKind::Hawk: return {CostClass::Vector, 0};
    case MixerKind::RetNet:
    case MixerKind::Mamba2: return {CostClass::Matrix, 5};
    case MixerKind::GLA:
    case MixerKind::RWKV6:
    case MixerKind::HGRN2: return {CostClass::Matrix, 7};
    case MixerKind::DeltaNet:
    case MixerKind::GatedDeltaNet: return {CostClass::Matrix, 8};
  }
  return {};
}

/// An exact rational FLOP count. `value` is the integer part; `exact` is
/// false when the denominator does not divide the numerator.
struct FlopCount {
  std::uint64_t numerator = 0;
  std::uint64_t denominator = 1;

  [[nodiscard]] std::uint64_t value() const { return numerator / denominator; }
  [[nodiscard]] bool exact() const { return numerator % denominator == 0; }
  friend bool operator==(const FlopCount& a, const FlopCount& b) {
    return static_cast<unsigned __int128>(a.numerator) * b.denominator ==
           static_cast<unsigned __int128>(b.numerator) * a.denominator;
  }
};

namespace cost_detail {

inline std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw ConfigError("FLOP count overflows 64 bits");
  return out;
}

inline std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw ConfigError("FLOP count overflows 64 bits");
  return out;
}

}  // namespace cost_detail

/// Per-token cost of one recurrent mixer layer: 5 d_model for vector kinds,
/// k d_model^2 / H for matrix kinds.
inline FlopCount per_token_flops(MixerKind kind, std::uint64_t d_model, std::uint64_t heads) {
  if (d_model == 0 || heads == 0) throw ConfigError("d_model and H must be positive");
  const auto c = cost_class(kind);
  if (c.cls == CostClass::Vector) return {cost_detail::mul(5, d_model), 1};
  return {cost_detail::mul(c.k, cost_detail::mul(d_model, d_model)), heads};
}

inline FlopCount per_token_flops(MixerKind kind, const Dimensions& dims) {
  dims.validate(kind);
  return per_token_flops(kind, dims.d_model, dims.H);
}

/// Softmax attention amortized per token: 2 L d_model (head count cancels).
inline FlopCount softmax_per_token_flops(std::uint64_t L, std::uint64_t d_model) {
  return {cost_detail::mul(2, cost_detail::mul(L, d_model)), 1};
}

/// Softmax attention per sequence: 2 L^2 d_model.
inline std::uint64_t softmax_per_sequence_flops(std::uint64_t L, std::uint64_t d_model) {
  return cost_detail::mul(2, cost_detail::mul(cost_detail::mul(L, L), d_model));
}

struct CostBreakdown {
  std::size_t linear_layers = 0;
  std::size_t full_layers = 0;
  std::uint64_t linear_sequence_flops = 0;   // all LINEAR layers
  std::uint64_t softmax_sequence_flops = 0;  // all FULL layers
};

struct CostReport {
  std::uint64_t L = 0;
  std::uint64_t per_token_flops = 0;     // network, amortized over the sequence
  std::uint64_t per_sequence_flops = 0;  // network, one sequence of length L
  std::uint64_t per_model_flops = 0;     // same as per_sequence_flops
  std::uint64_t kv_cache_bytes = 0;
  std::uint64_t recurrent_state_bytes = 0;
  bool exact = true;
  CostBreakdown breakdown;
};

/// Token-mixer cost of the whole network at sequence length L.
inline CostReport model_flops(const HybridConfig& config, std::uint64_t L, std::uint64_t element_bytes = 2) {
  using cost_detail::add;
  using cost_detail::mul;
  if (L == 0) throw ConfigError("sequence length must be positive");
  config.validate();
  CostReport r;
  r.L = L;
  const auto layer = per_token_flops(config.kind, config.d_model, config.heads);
  for (auto kind : build_schedule(config)) {
    if (kind == LayerKind::Full) {
      ++r.breakdown.full_layers;
      r.breakdown.softmax_sequence_flops = add(r.breakdown.softmax_sequence_flops,
                                               softmax_per_sequence_flops(L, config.d_model));
    } else {
      ++r.breakdown.linear_layers;
    }
  }
  // Sum numerators before dividing so the integer part stays exact.
  const FlopCount linear_token{mul(layer.numerator, r.breakdown.linear_layers), layer.denominator};
  const FlopCount linear_sequence{mul(linear_token.numerator, L), layer.denominator};
  r.breakdown.linear_sequence_flops = linear_sequence.value();
  r.exact = linear_sequence.exact() && linear_token.exact();
  r.per_token_flops = add(linear_token.value(), mul(r.breakdown.full_layers, softmax_per_token_flops(L, config.d_model).value()));
  r.per_sequence_flops = add(r.breakdown.linear_sequence_flops, r.breakdown.softmax_sequence_flops);
  r.per_model_flops = r.per_sequence_flops;
  const auto cache = cache_report(config, L, element_bytes);
  r.kv_cache_bytes = cache.kv_cache_bytes;
  r.recurrent_state_bytes = cache.recurrent_state_bytes;
  return r;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kCostCsvHeader =
    "label,ratio,kind,L,d_model,H,per_token_flops,per_sequence_flops,kv_cache_bytes,score";

/// Name used in the kind column; a full transformer has no recurrent mixer.
inline std::string cost_kind_label(const HybridConfig& config) {
  return config.ratio.mode == RatioMode::FullTransformer ? "softmax" : std::string(to_string(config.kind));
}

inline std::string cost_label(const HybridConfig& config) {
  if (config.ratio.mode == RatioMode::FullTransformer) return "transformer";
  return std::string(to_string(config.kind)) + "-" + config.ratio.label();
}

inline void write_cost_row(std::ostream& out, const std::string& label, const HybridConfig& config,
                           const CostReport& report, std::optional<double> score = std::nullopt) {
  out << label << ',' << config.ratio.label() << ',' << cost_kind_label(config) << ',' << report.L << ','
      << config.d_model << ',' << config.heads << ',' << report.per_token_flops << ',' << report.per_sequence_flops
      << ',' << report.kv_cache_bytes << ',';
  if (score) {
    const auto old = out.precision(10);
    out << *score;
    out.precision(old);
  }
  out << '\n';
}

}  // namespace mixerforge

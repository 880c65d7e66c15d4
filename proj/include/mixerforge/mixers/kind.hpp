#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "mixerforge/numerics/tensor.hpp"

namespace mixerforge {

enum class MixerKind { HGRN, Hawk, RetNet, GLA, Mamba2, RWKV6, HGRN2, DeltaNet, GatedDeltaNet };

enum class StateForm { Vector, Matrix };

inline constexpr std::array<MixerKind, 9> kAllMixerKinds = {
    MixerKind::HGRN,  MixerKind::Hawk,  MixerKind::RetNet,   MixerKind::GLA,           MixerKind::Mamba2,
    MixerKind::RWKV6, MixerKind::HGRN2, MixerKind::DeltaNet, MixerKind::GatedDeltaNet,
};

constexpr std::string_view to_string(MixerKind kind) {
  switch (kind) {
    case MixerKind::HGRN: return "HGRN";
    case MixerKind::Hawk: return "Hawk";
    case MixerKind::RetNet: return "RetNet";
    case MixerKind::GLA: return "GLA";
    case MixerKind::Mamba2: return "Mamba2";
    case MixerKind::RWKV6: return "RWKV6";
    case MixerKind::HGRN2: return "HGRN2";
    case MixerKind::DeltaNet: return "DeltaNet";
    case MixerKind::GatedDeltaNet: return "GatedDeltaNet";
  }
  return "?";
}

inline std::optional<MixerKind> parse_mixer_kind(std::string_view name) {
  for (auto kind : kAllMixerKinds)
    if (to_string(kind) == name) return kind;
  return std::nullopt;
}

/// Gen-1 keeps a vector state; Gen-2 (decay) and Gen-3 (delta rule) a matrix.
constexpr int generation(MixerKind kind) {
  switch (kind) {
    case MixerKind::HGRN:
    case MixerKind::Hawk: return 1;
    case MixerKind::DeltaNet:
    case MixerKind::GatedDeltaNet: return 3;
    default: return 2;
  }
}

constexpr StateForm state_form(MixerKind kind) {
  return generation(kind) == 1 ? StateForm::Vector : StateForm::Matrix;
}

constexpr bool is_delta_family(MixerKind kind) { return generation(kind) == 3; }
constexpr bool is_decay_family(MixerKind kind) { return generation(kind) == 2; }
constexpr bool is_single_head(MixerKind kind) { return generation(kind) == 1; }

/// Sequence length, head count, head width and model width.
struct Dimensions {
  std::size_t L = 1;
  std::size_t H = 1;
  std::size_t d = 1;
  std::size_t d_model = 1;

  static Dimensions from_model(std::size_t d_model, std::size_t heads, std::size_t length = 1) {
    if (heads == 0 || d_model % heads != 0)
      throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by H " + std::to_string(heads));
    return {length, heads, d_model / heads, d_model};
  }

  void validate() const {
    if (L == 0) throw ConfigError("sequence length must be positive");
    if (H == 0 || d == 0) throw ConfigError("head count and width must be positive");
    if (d_model != H * d)
      throw ConfigError("d_model (" + std::to_string(d_model) + ") must equal H*d (" + std::to_string(H * d) + ")");
  }

  void validate(MixerKind kind) const {
    validate();
    if (is_single_head(kind) && H != 1)
      throw ConfigError(std::string(to_string(kind)) + " is single-head; got H=" + std::to_string(H));
  }

  friend bool operator==(const Dimensions&, const Dimensions&) = default;
};

}  // namespace mixerforge

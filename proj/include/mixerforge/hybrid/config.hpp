#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixerforge/mixers/kind.hpp"

namespace mixerforge {

enum class RatioMode { Ratio, PureLinear, FullTransformer };

/// Linear:full interleaving ratio r:1, or one of the two pure sentinels.
struct RatioSpec {
  RatioMode mode = RatioMode::Ratio;
  std::size_t r = 3;

  static RatioSpec ratio(std::size_t r) { return {RatioMode::Ratio, r}; }
  static RatioSpec pure_linear() { return {RatioMode::PureLinear, 0}; }
  static RatioSpec full_transformer() { return {RatioMode::FullTransformer, 0}; }

  [[nodiscard]] std::string label() const {
    switch (mode) {
      case RatioMode::PureLinear: return "pure";
      case RatioMode::FullTransformer: return "full";
      case RatioMode::Ratio: break;
    }
    return std::to_string(r) + ":1";
  }

  /// Accepts "r:1", "r", "pure" and "full".
  static RatioSpec parse(const std::string& text) {
    if (text == "pure" || text == "PURE_LINEAR") return pure_linear();
    if (text == "full" || text == "FULL_TRANSFORMER") return full_transformer();
    std::string digits = text;
    if (auto pos = text.find(':'); pos != std::string::npos) {
      if (text.substr(pos) != ":1") throw ConfigError("ratio must look like r:1, got '" + text + "'");
      digits = text.substr(0, pos);
    }
    if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigError("invalid ratio '" + text + "'");
    const auto r = static_cast<std::size_t>(std::stoull(digits));
    if (r < 1) throw ConfigError("ratio r must be at least 1");
    return ratio(r);
  }

  friend bool operator==(const RatioSpec&, const RatioSpec&) = default;
};

enum class LayerKind { Linear, Full };
using LayerSchedule = std::vector<LayerKind>;

inline std::string schedule_string(const LayerSchedule& s) {
  std::string out;
  for (auto k : s) out += k == LayerKind::Linear ? 'L' : 'F';
  return out;
}

struct HybridConfig {
  RatioSpec ratio;
  std::size_t repeats = 1;  // N, ratio mode
  std::size_t depth = 0;    // total layers, sentinel modes
  MixerKind kind = MixerKind::GLA;
  std::size_t d_model = 32;
  std::size_t heads = 2;
  std::size_t max_len = 64;
  std::size_t vocab = 32;
  std::size_t mlp_mult = 4;

  [[nodiscard]] Dimensions dims() const { return Dimensions::from_model(d_model, heads, max_len); }

  [[nodiscard]] std::size_t total_layers() const {
    return ratio.mode == RatioMode::Ratio ? repeats * (ratio.r + 1) : depth;
  }

  void validate() const {
    if (ratio.mode == RatioMode::Ratio && ratio.r < 1) throw ConfigError("ratio r must be at least 1");
    if (vocab == 0) throw ConfigError("vocab must be positive");
    if (max_len == 0) throw ConfigError("max_len must be positive");
    if (mlp_mult == 0) throw ConfigError("mlp_mult must be positive");
    dims().validate(kind);
  }

  /// Same model at `sentinel` with this config's total depth.
  [[nodiscard]] HybridConfig at_equal_depth(RatioSpec sentinel) const {
    HybridConfig out = *this;
    out.depth = total_layers();
    out.ratio = sentinel;
    if (sentinel.mode == RatioMode::Ratio) {
      if (out.depth % (sentinel.r + 1) != 0)
        throw ConfigError("depth " + std::to_string(out.depth) + " is not a multiple of " +
                          std::to_string(sentinel.r + 1));
      out.repeats = out.depth / (sentinel.r + 1);
    }
    return out;
  }
};

/// (LINEAR x r, FULL) x N for ratio mode; all-LINEAR / all-FULL at `depth`
/// for the sentinels.
inline LayerSchedule build_schedule(const HybridConfig& config) {
  LayerSchedule out;
  switch (config.ratio.mode) {
    case RatioMode::Ratio:
      if (config.ratio.r < 1) throw ConfigError("ratio r must be at least 1");
      for (std::size_t n = 0; n < config.repeats; ++n) {
        out.insert(out.end(), config.ratio.r, LayerKind::Linear);
        out.push_back(LayerKind::Full);
      }
      break;
    case RatioMode::PureLinear: out.assign(config.depth, LayerKind::Linear); break;
    case RatioMode::FullTransformer: out.assign(config.depth, LayerKind::Full); break;
  }
  return out;
}

struct CacheReport {
  std::size_t full_layers = 0;
  std::size_t linear_layers = 0;
  std::uint64_t kv_cache_bytes = 0;         // grows with L
  std::uint64_t recurrent_state_bytes = 0;  // constant in L
  [[nodiscard]] std::uint64_t total_bytes() const { return kv_cache_bytes + recurrent_state_bytes; }
};

/// Inference memory at sequence length L: every FULL layer stores keys and
/// values for all L tokens; every LINEAR layer a fixed-size state.
inline CacheReport cache_report(const HybridConfig& config, std::uint64_t L, std::uint64_t element_bytes = 2) {
  CacheReport r;
  for (auto k : build_schedule(config)) (k == LayerKind::Full ? r.full_layers : r.linear_layers)++;
  const std::uint64_t dm = config.d_model, h = config.heads, d = dm / h;
  r.kv_cache_bytes = r.full_layers * 2 * L * dm * element_bytes;
  const std::uint64_t state_elems = state_form(config.kind) == StateForm::Vector ? dm : h * d * d;
  r.recurrent_state_bytes = r.linear_layers * state_elems * element_bytes;
  return r;
}

// JSON round-trip with strict key checking.

inline void to_json(nlohmann::json& j, const HybridConfig& c) {
  j = nlohmann::json{{"ratio", c.ratio.label()},       {"repeats", c.repeats},   {"depth", c.depth},
                     {"kind", std::string(to_string(c.kind))}, {"d_model", c.d_model}, {"heads", c.heads},
                     {"max_len", c.max_len},           {"vocab", c.vocab},       {"mlp_mult", c.mlp_mult}};
}

inline void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown key '" + key + "' in " + where);
}

inline void from_json(const nlohmann::json& j, HybridConfig& c) {
  reject_unknown_keys(j, {"ratio", "repeats", "depth", "kind", "d_model", "heads", "max_len", "vocab", "mlp_mult"},
                      "model config");
  try {
    if (j.contains("ratio")) c.ratio = RatioSpec::parse(j.at("ratio").get<std::string>());
    if (j.contains("kind")) {
      auto kind = parse_mixer_kind(j.at("kind").get<std::string>());
      if (!kind) throw ConfigError("unknown mixer kind '" + j.at("kind").get<std::string>() + "'");
      c.kind = *kind;
    }
    if (j.contains("repeats")) c.repeats = j.at("repeats").get<std::size_t>();
    if (j.contains("depth")) c.depth = j.at("depth").get<std::size_t>();
    if (j.contains("d_model")) c.d_model = j.at("d_model").get<std::size_t>();
    if (j.contains("heads")) c.heads = j.at("heads").get<std::size_t>();
    if (j.contains("max_len")) c.max_len = j.at("max_len").get<std::size_t>();
    if (j.contains("vocab")) c.vocab = j.at("vocab").get<std::size_t>();
    if (j.contains("mlp_mult")) c.mlp_mult = j.at("mlp_mult").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
}

}  // namespace mixerforge

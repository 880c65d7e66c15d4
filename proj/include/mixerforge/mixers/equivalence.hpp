#pragma once

#include <string>
#include <vector>

#include "mixerforge/mixers/chunked.hpp"
#include "mixerforge/mixers/oracle.hpp"
#include "mixerforge/numerics/random.hpp"

namespace mixerforge {

/// Random head inputs with gates drawn inside their open ranges and unit
/// keys for the delta family.
inline HeadSequence<Tensor<double>> random_head_sequence(MixerKind kind, std::size_t L, std::size_t d, Rng& rng) {
  using TD = Tensor<double>;
  auto unit = [](TD k) {
    double n = 0.0;
    for (double x : k.data()) n += x * x;
    n = std::sqrt(n);
    for (auto& x : k.data()) x /= n;
    return k;
  };
  HeadSequence<TD> seq;
  const TD bonus = rng.normal_tensor({d});
  const double gamma = rng.uniform(0.5, 0.99);
  for (std::size_t t = 0; t < L; ++t) {
    TokenProjection<TD> p{rng.normal_tensor({d}), rng.normal_tensor({d}), rng.normal_tensor({d})};
    if (is_delta_family(kind)) p.k = unit(p.k);
    GateSet<TD> g;
    auto gate_vec = [&] { return rng.uniform_tensor({d}, 0.05, 0.95); };
    auto gate_scalar = [&] { return TD::scalar(rng.uniform(0.05, 0.95)); };
    switch (kind) {
      case MixerKind::HGRN:
      case MixerKind::GLA:
      case MixerKind::HGRN2: g.alpha = gate_vec(); break;
      case MixerKind::RWKV6:
        g.alpha = gate_vec();
        g.bonus = bonus;
        break;
      case MixerKind::Hawk:
        g.r = gate_vec();
        g.i = gate_vec();
        break;
      case MixerKind::RetNet: g.gamma = TD::scalar(gamma); break;
      case MixerKind::Mamba2: g.gamma_t = gate_scalar(); break;
      case MixerKind::DeltaNet: g.beta = gate_scalar(); break;
      case MixerKind::GatedDeltaNet:
        g.beta = gate_scalar();
        g.alpha_scalar = gate_scalar();
        break;
    }
    seq.tokens.push_back(std::move(p));
    seq.gates.push_back(std::move(g));
  }
  return seq;
}

struct EquivalenceRow {
  std::string check;  // mixer kind or lattice identity
  std::size_t trials = 0;
  double max_error = 0.0;
  double tolerance = 0.0;

  [[nodiscard]] bool passed() const { return max_error <= tolerance; }
};

struct EquivalenceOptions {
  std::size_t max_length = 64;
  std::size_t max_dim = 8;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double tolerance = 1e-10;
  double lattice_tolerance = 1e-12;
  bool inject_fault = false;  // perturbs the state after the first update
};

/// Scan vs the unrolled oracle: each trial draws L in [1, max_length] and
/// d in [1, max_dim], and runs both through explicit head inputs (one head)
/// and through projected parameters (two heads where allowed).
inline EquivalenceRow oracle_equivalence(MixerKind kind, const EquivalenceOptions& opt) {
  if (opt.max_length == 0 || opt.max_dim == 0 || opt.trials == 0)
    throw ConfigError("equivalence: length, dimension and trials must be positive");
  Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(kind) + 1));
  StepObserver<Tensor<double>> fault;
  if (opt.inject_fault)
    fault = [](std::size_t t, MixerState<Tensor<double>>& s) {
      if (t == 0) s.value.data()[0] += 1e-3;
    };
  EquivalenceRow row{std::string(to_string(kind)), opt.trials, 0.0, opt.tolerance};
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    const auto L = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(opt.max_length)));
    if (trial % 2 == 0) {
      const auto d = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(opt.max_dim)));
      const auto seq = random_head_sequence(kind, L, d, rng);
      row.max_error = std::max(row.max_error, relative_error(scan_head(kind, seq, fault), oracle_unrolled(kind, seq)));
      continue;
    }
    const std::size_t H = is_single_head(kind) || opt.max_dim < 2 ? 1 : 2;
    const auto d = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(opt.max_dim / H)));
    const auto params = init_mixer_params<double>(kind, Dimensions::from_model(H * d, H, L), rng);
    const auto x = rng.normal_tensor({L, H * d});
    const auto heads = head_sequences(params, x);
    const auto want = oracle_unrolled(params, x);
    for (std::size_t h = 0; h < H; ++h)
      row.max_error = std::max(row.max_error, relative_error(scan_head(kind, heads[h], fault), want[h]));
  }
  return row;
}

/// The three reduction identities, elementwise on random inputs:
/// GLA with a constant gate == RetNet, Mamba2 with a constant gate ==
/// RetNet, HGRN2 == GLA with key 1 - alpha.
inline std::vector<EquivalenceRow> lattice_equivalence(const EquivalenceOptions& opt) {
  using TD = Tensor<double>;
  Rng rng(derive_seed(opt.seed, 100));
  EquivalenceRow gla{"GLA(alpha=gamma)==RetNet", opt.trials, 0.0, opt.lattice_tolerance};
  EquivalenceRow mamba{"Mamba2(gamma_t=gamma)==RetNet", opt.trials, 0.0, opt.lattice_tolerance};
  EquivalenceRow hgrn2{"HGRN2==GLA(k=1-alpha)", opt.trials, 0.0, opt.lattice_tolerance};
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    const auto L = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(opt.max_length)));
    const auto d = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(opt.max_dim)));
    const auto ret = random_head_sequence(MixerKind::RetNet, L, d, rng);
    const TD reference = scan_head(MixerKind::RetNet, ret);
    auto as_gla = ret, as_mamba = ret;
    for (auto& g : as_gla.gates) {
      g.alpha = TD::full({d}, (*g.gamma)[0]);
      g.gamma.reset();
    }
    for (auto& g : as_mamba.gates) {
      g.gamma_t = g.gamma;
      g.gamma.reset();
    }
    gla.max_error = std::max(gla.max_error, max_abs_diff(scan_head(MixerKind::GLA, as_gla), reference));
    mamba.max_error = std::max(mamba.max_error, max_abs_diff(scan_head(MixerKind::Mamba2, as_mamba), reference));

    const auto h2 = random_head_sequence(MixerKind::HGRN2, L, d, rng);
    auto tied = h2;
    for (std::size_t t = 0; t < L; ++t) tied.tokens[t].k = sub(TD::full({d}, 1.0), *tied.gates[t].alpha);
    hgrn2.max_error =
        std::max(hgrn2.max_error, max_abs_diff(scan_head(MixerKind::HGRN2, h2), scan_head(MixerKind::GLA, tied)));
  }
  return {gla, mamba, hgrn2};
}

/// scan_chunked_head vs scan_head for a decay-family kind at each chunk size.
inline EquivalenceRow chunked_equivalence(MixerKind kind, const std::vector<std::size_t>& chunks,
                                          const EquivalenceOptions& opt) {
  Rng rng(derive_seed(opt.seed, 200 + static_cast<std::uint64_t>(kind)));
  EquivalenceRow row{std::string(to_string(kind)) + " chunked", 0, 0.0, opt.tolerance};
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    const auto L = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(opt.max_length)));
    const auto d = static_cast<std::size_t>(rng.integer(1, static_cast<std::int64_t>(opt.max_dim)));
    const auto seq = random_head_sequence(kind, L, d, rng);
    const auto reference = scan_head(kind, seq);
    for (std::size_t c : chunks) {
      row.max_error = std::max(row.max_error, relative_error(scan_chunked_head(kind, seq, c == 0 ? L : c), reference));
      ++row.trials;
    }
  }
  return row;
}

}  // namespace mixerforge

#include <gtest/gtest.h>

#include <cmath>

#include "mixerforge/mixers/chunked.hpp"
#include "mixerforge/mixers/oracle.hpp"
#include "mixerforge/numerics/autodiff.hpp"

using namespace mixerforge;
using TD = Tensor<double>;

namespace {

std::string kind_name(const ::testing::TestParamInfo<MixerKind>& info) { return std::string(to_string(info.param)); }

TD unit(TD k) {
  double n = 0.0;
  for (double x : k.data()) n += x * x;
  n = std::sqrt(n);
  for (auto& x : k.data()) x /= n;
  return k;
}

/// Explicit random head inputs with gates drawn inside their ranges.
HeadSequence<TD> random_head(MixerKind kind, std::size_t L, std::size_t d, Rng& rng) {
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

Dimensions dims_for(MixerKind kind, std::size_t d_model, std::size_t heads, std::size_t L) {
  return Dimensions::from_model(d_model, is_single_head(kind) ? 1 : heads, L);
}

/// Random parameters with nonzero biases and bonus so every term is exercised.
MixerParams<TD> random_params(MixerKind kind, const Dimensions& dims, std::uint64_t seed) {
  Rng rng(seed);
  auto p = init_mixer_params<double>(kind, dims, rng);
  for (auto& [name, t] : p.tensors)
    if (name.rfind("b_", 0) == 0 || name == "bonus") t = rng.uniform_tensor(t.shape(), -0.5, 0.5);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// init_state / compute_gates

TEST(InitState, RetNetMatrix) {
  auto s = init_state<double>(MixerKind::RetNet, Dimensions::from_model(2, 1));
  EXPECT_EQ(s.value, TD::matrix({{0, 0}, {0, 0}}));
}

TEST(InitState, HgrnVector) {
  auto s = init_state<double>(MixerKind::HGRN, Dimensions::from_model(3, 1));
  EXPECT_EQ(s.value, TD::vector({0, 0, 0}));
}

TEST(InitState, SingleHeadKindsRejectMultipleHeads) {
  EXPECT_THROW(init_state<double>(MixerKind::HGRN, Dimensions::from_model(4, 2)), ConfigError);
  EXPECT_THROW(init_state<double>(MixerKind::Hawk, Dimensions::from_model(4, 2)), ConfigError);
  EXPECT_NO_THROW(init_state<double>(MixerKind::GLA, Dimensions::from_model(4, 2)));
}

TEST(ComputeGates, ZeroWeightsGiveOneHalf) {
  for (auto kind : kAllMixerKinds) {
    const auto dims = dims_for(kind, 4, 2, 1);
    auto p = init_mixer_params<double>(kind, dims, 1);
    for (auto& [name, t] : p.tensors)
      if (name.rfind("w_", 0) == 0 || name.rfind("b_", 0) == 0) t = TD(t.shape());
    Rng rng(2);
    for (const auto& g : compute_gates(p, rng.normal_tensor({4}))) {
      for (const auto* gate : {&g.alpha, &g.alpha_scalar, &g.beta, &g.gamma_t, &g.r, &g.i})
        if (*gate)
          for (double x : (*gate)->data()) EXPECT_EQ(x, 0.5) << to_string(kind);
    }
  }
}

TEST(ComputeGates, RetNetGammaComesFromParams) {
  const auto dims = Dimensions::from_model(6, 3);
  auto p = init_mixer_params<double>(MixerKind::RetNet, dims, 4);
  Rng rng(5);
  auto a = compute_gates(p, rng.normal_tensor({6}));
  auto b = compute_gates(p, rng.normal_tensor({6}));
  for (std::size_t h = 0; h < 3; ++h) {
    EXPECT_EQ((*a[h].gamma)[0], p.get("gamma").at(0, h));
    EXPECT_EQ(*a[h].gamma, *b[h].gamma);
    EXPECT_GT((*a[h].gamma)[0], 0.9);
    EXPECT_LT((*a[h].gamma)[0], 0.999);
  }
}

TEST(ComputeGates, GlaAlphaIsPerChannel) {
  const auto dims = Dimensions::from_model(8, 2);
  auto p = init_mixer_params<double>(MixerKind::GLA, dims, 6);
  Rng rng(7);
  auto gates = compute_gates(p, rng.normal_tensor({8}));
  ASSERT_EQ(gates.size(), 2u);
  const auto& alpha = *gates[0].alpha;
  ASSERT_EQ(alpha.numel(), 4u);
  for (double x : alpha.data()) {
    EXPECT_GT(x, 0.0);
    EXPECT_LT(x, 1.0);
  }
  EXPECT_NE(alpha[0], alpha[1]);
  EXPECT_FALSE(gates[0].beta || gates[0].gamma || gates[0].r);
}

TEST(ComputeGates, WrongWidthThrows) {
  auto p = init_mixer_params<double>(MixerKind::GLA, Dimensions::from_model(4, 1), 1);
  EXPECT_THROW(compute_gates(p, TD(Shape{3})), ShapeError);
}

// ---------------------------------------------------------------------------
// step

TEST(Step, RetNetHandCase) {
  GateSet<TD> g;
  g.gamma = TD::scalar(0.5);
  auto r = step(MixerKind::RetNet, MixerState<TD>{TD::identity(2)},
                TokenProjection<TD>{TD::vector({1, 1}), TD::vector({1, 0}), TD::vector({0, 1})}, g);
  EXPECT_EQ(r.state.value, TD::matrix({{0.5, 0}, {1, 0.5}}));
  EXPECT_EQ(r.output, TD::vector({0.5, 1.5}));
}

TEST(Step, DeltaNetZeroBetaIsIdentity) {
  Rng rng(11);
  const TD s = rng.normal_tensor({3, 3});
  GateSet<TD> g;
  g.beta = TD::scalar(0.0);
  TokenProjection<TD> p{rng.normal_tensor({3}), unit(rng.normal_tensor({3})), rng.normal_tensor({3})};
  auto r = step(MixerKind::DeltaNet, MixerState<TD>{s}, p, g);
  EXPECT_EQ(r.state.value, s);
  EXPECT_EQ(r.output, matmul(s, p.q));
}

TEST(Step, DeltaNetUnitBetaFromZero) {
  GateSet<TD> g;
  g.beta = TD::scalar(1.0);
  TokenProjection<TD> p{TD::vector({1, 2}), TD::vector({0.6, 0.8}), TD::vector({3, -1})};
  auto r = step(MixerKind::DeltaNet, MixerState<TD>{TD(Shape{2, 2})}, p, g);
  EXPECT_LE(max_abs_diff(r.state.value, outer(p.v, p.k)), 1e-15);
}

TEST(Step, HgrnConvexCombination) {
  GateSet<TD> g;
  g.alpha = TD::vector({0.5, 0.5});
  auto r = step(MixerKind::HGRN, MixerState<TD>{TD::vector({1, 1})},
                TokenProjection<TD>{TD::vector({1, 1}), TD::vector({0, 0}), TD::vector({0, 2})}, g);
  EXPECT_EQ(r.state.value, TD::vector({0.5, 1.5}));
}

TEST(Step, GatedDeltaNetUnitAlphaMatchesDeltaNet) {
  Rng rng(12);
  const TD s = rng.normal_tensor({4, 4});
  TokenProjection<TD> p{rng.normal_tensor({4}), unit(rng.normal_tensor({4})), rng.normal_tensor({4})};
  GateSet<TD> gd, gg;
  gd.beta = gg.beta = TD::scalar(0.3);
  gg.alpha_scalar = TD::scalar(1.0);
  auto a = step(MixerKind::DeltaNet, MixerState<TD>{s}, p, gd);
  auto b = step(MixerKind::GatedDeltaNet, MixerState<TD>{s}, p, gg);
  EXPECT_EQ(a.state.value, b.state.value);
  EXPECT_EQ(a.output, b.output);
}

TEST(Step, RejectsNonUnitDeltaKey) {
  GateSet<TD> g;
  g.beta = TD::scalar(0.5);
  TokenProjection<TD> p{TD::vector({1, 0}), TD::vector({1, 1}), TD::vector({0, 1})};
  EXPECT_THROW(step(MixerKind::DeltaNet, MixerState<TD>{TD(Shape{2, 2})}, p, g), InputError);
}

TEST(Step, RejectsOutOfRangeOrStrayGates) {
  TokenProjection<TD> p{TD::vector({1, 0}), TD::vector({1, 0}), TD::vector({0, 1})};
  const MixerState<TD> s{TD(Shape{2, 2})};
  GateSet<TD> g;
  g.alpha = TD::vector({0.5, 1.0});
  EXPECT_THROW(step(MixerKind::GLA, s, p, g), InputError);
  g.alpha = TD::vector({0.5, 0.0});
  EXPECT_THROW(step(MixerKind::GLA, s, p, g), InputError);
  g.alpha = TD::vector({0.5, 0.5});
  g.beta = TD::scalar(0.5);
  EXPECT_THROW(step(MixerKind::GLA, s, p, g), InputError);
  GateSet<TD> empty;
  EXPECT_THROW(step(MixerKind::RetNet, s, p, empty), InputError);
}

TEST(Step, RwkvReadoutUsesPreviousState) {
  Rng rng(13);
  const TD s = rng.normal_tensor({3, 3});
  TokenProjection<TD> p{rng.normal_tensor({3}), rng.normal_tensor({3}), rng.normal_tensor({3})};
  GateSet<TD> g;
  g.alpha = rng.uniform_tensor({3}, 0.1, 0.9);
  g.bonus = rng.normal_tensor({3});
  auto r = step(MixerKind::RWKV6, MixerState<TD>{s}, p, g);
  TD expected(Shape{3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) expected[i] += (s.at(i, j) + (*g.bonus)[i] * p.v[i] * p.k[j]) * p.q[j];
  EXPECT_LE(max_abs_diff(r.output, expected), 1e-14);
}

// ---------------------------------------------------------------------------
// scan vs oracle

class MixerKindTest : public ::testing::TestWithParam<MixerKind> {};

TEST_P(MixerKindTest, ScanMatchesOracleOnExplicitInputs) {
  const MixerKind kind = GetParam();
  Rng rng(20);
  for (std::size_t d : {1u, 3u, 8u}) {
    for (std::size_t L : {1u, 7u, 64u}) {
      auto seq = random_head(kind, L, d, rng);
      const TD got = scan_head(kind, seq);
      const TD want = oracle_unrolled(kind, seq);
      EXPECT_LE(relative_error(got, want), 1e-10) << "d=" << d << " L=" << L;
    }
  }
}

TEST_P(MixerKindTest, ScanMatchesOracleThroughParams) {
  const MixerKind kind = GetParam();
  const auto dims = dims_for(kind, 8, 2, 32);
  const auto params = random_params(kind, dims, 21);
  Rng rng(22);
  const TD x = rng.normal_tensor({32, 8});
  const auto got = scan(params, x);
  const auto want = oracle_unrolled(params, x);
  ASSERT_EQ(got.size(), dims.H);
  for (std::size_t h = 0; h < dims.H; ++h) EXPECT_LE(relative_error(got[h], want[h]), 1e-10);
}

TEST_P(MixerKindTest, SingleTokenIsOneStep) {
  const MixerKind kind = GetParam();
  Rng rng(23);
  auto seq = random_head(kind, 1, 4, rng);
  auto r = step(kind, zero_state(kind, 4, seq.tokens[0].q), seq.tokens[0], seq.gates[0]);
  EXPECT_EQ(scan_head(kind, seq), r.output.reshaped({1, 4}));
}

TEST_P(MixerKindTest, PrefixProperty) {
  const MixerKind kind = GetParam();
  Rng rng(24);
  auto seq = random_head(kind, 20, 4, rng);
  const TD full = scan_head(kind, seq);
  auto prefix = seq;
  prefix.tokens.resize(9);
  prefix.gates.resize(9);
  EXPECT_EQ(scan_head(kind, prefix), slice(full, 0, 9, 0, 4));
}

TEST_P(MixerKindTest, Causality) {
  const MixerKind kind = GetParam();
  const auto dims = dims_for(kind, 6, 2, 12);
  const auto params = random_params(kind, dims, 25);
  Rng rng(26);
  TD x = rng.normal_tensor({12, 6});
  const auto before = scan(params, x);
  for (std::size_t c = 0; c < 6; ++c) x.at(7, c) += 3.0;
  const auto after = scan(params, x);
  for (std::size_t h = 0; h < dims.H; ++h) {
    EXPECT_EQ(slice(before[h], 0, 7, 0, dims.d), slice(after[h], 0, 7, 0, dims.d));
    EXPECT_NE(slice(before[h], 7, 8, 0, dims.d), slice(after[h], 7, 8, 0, dims.d));
  }
}

TEST_P(MixerKindTest, GradientMatchesFiniteDifferences) {
  const MixerKind kind = GetParam();
  const auto dims = dims_for(kind, 4, 2, 8);
  const auto params = random_params(kind, dims, 27);
  Rng rng(28);
  GraphBuilder b;
  auto leaves = param_leaves(b, params);
  auto x = b.leaf("x", {8, 4});
  std::vector<Expr> heads = scan(leaves, x);
  auto out = concat_cols(heads);
  auto g = b.build(sum(mul(b.leaf("w", out.shape()), out)));
  Bindings<double> bind{{"x", rng.normal_tensor({8, 4})}, {"w", rng.normal_tensor({8, 4})}};
  std::set<std::string> wrt{"x"};
  for (const auto& [name, t] : params.tensors) {
    bind.emplace(name, t);
    wrt.insert(name);
  }
  // Eager and graph paths agree.
  const auto eager = scan(params, bind.at("x"));
  const TD expect = evaluate(g, bind);
  EXPECT_NEAR(sum(mul(bind.at("w"), concat_cols(eager)))[0], expect[0], 1e-12);
  const auto report = finite_difference_check(g, bind, wrt);
  EXPECT_LE(report.max_rel_error, 1e-5) << report.worst_leaf << "[" << report.worst_index << "] analytic "
                                        << report.analytic << " numeric " << report.numeric;
}

TEST_P(MixerKindTest, FusedScanMatchesStepwiseScan) {
  const MixerKind kind = GetParam();
  const auto dims = dims_for(kind, 8, 2, 24);
  const auto params = random_params(kind, dims, 29);
  Rng rng(30);
  const TD x = rng.normal_tensor({24, 8});
  if (!has_fused_scan(kind)) {
    EXPECT_THROW(fused_scan_head(params, project(params, x), 0, 24, 0), ConfigError);
    return;
  }
  const auto want = scan(params, x);
  const auto proj = project(params, x);
  for (std::size_t h = 0; h < dims.H; ++h) {
    EXPECT_LE(relative_error(fused_scan_head(params, proj, 0, 24, h), want[h]), 1e-12);
    EXPECT_LE(relative_error(fused_scan_head(params, proj, 5, 9, h), scan_head(kind, head_sequences(params, proj, 5, 9)[h])),
              1e-12);
  }
}

TEST_P(MixerKindTest, RejectsEmptySequence) {
  const MixerKind kind = GetParam();
  HeadSequence<TD> empty;
  EXPECT_THROW(scan_head(kind, empty), ConfigError);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, MixerKindTest, ::testing::ValuesIn(kAllMixerKinds), kind_name);

// ---------------------------------------------------------------------------
// oracle hand cases and reduction lattice

TEST(Oracle, RetNetUnitDecayIsPrefixSum) {
  Rng rng(30);
  auto seq = random_head(MixerKind::RetNet, 6, 3, rng);
  // gamma = 1 is outside the step's open range, so compare the oracle alone.
  for (auto& g : seq.gates) g.gamma = TD::scalar(1.0);
  const TD out = oracle_unrolled(MixerKind::RetNet, seq);
  TD s(Shape{3, 3});
  for (std::size_t t = 0; t < 6; ++t) {
    s = add(s, outer(seq.tokens[t].v, seq.tokens[t].k));
    EXPECT_LE(max_abs_diff(row(out, t, 0, 3), matmul(s, seq.tokens[t].q)), 1e-13);
  }
}

TEST(Oracle, TwoStepHandCase) {
  Rng rng(31);
  auto seq = random_head(MixerKind::RetNet, 2, 3, rng);
  const double gamma = (*seq.gates[0].gamma)[0];
  const auto& p1 = seq.tokens[0];
  const auto& p2 = seq.tokens[1];
  auto dot = [](const TD& a, const TD& b) { return sum(mul(a, b))[0]; };
  const TD o2 = add(scale(p1.v, gamma * dot(p1.k, p2.q)), scale(p2.v, dot(p2.k, p2.q)));
  EXPECT_LE(max_abs_diff(row(oracle_unrolled(MixerKind::RetNet, seq), 1, 0, 3), o2), 1e-14);
}

TEST(Lattice, GlaWithConstantGateIsRetNet) {
  Rng rng(32);
  auto ret = random_head(MixerKind::RetNet, 40, 5, rng);
  auto gla = ret;
  for (auto& g : gla.gates) {
    g.alpha = TD::full({5}, (*g.gamma)[0]);
    g.gamma.reset();
  }
  EXPECT_LE(relative_error(scan_head(MixerKind::GLA, gla), scan_head(MixerKind::RetNet, ret)), 1e-12);
  EXPECT_LE(relative_error(oracle_unrolled(MixerKind::GLA, gla), oracle_unrolled(MixerKind::RetNet, ret)), 1e-12);
}

TEST(Lattice, Mamba2WithConstantGateIsRetNet) {
  Rng rng(33);
  auto ret = random_head(MixerKind::RetNet, 40, 5, rng);
  auto mamba = ret;
  for (auto& g : mamba.gates) {
    g.gamma_t = g.gamma;
    g.gamma.reset();
  }
  EXPECT_LE(relative_error(scan_head(MixerKind::Mamba2, mamba), scan_head(MixerKind::RetNet, ret)), 1e-12);
}

TEST(Lattice, Hgrn2IsGlaWithTiedKey) {
  Rng rng(34);
  auto hgrn2 = random_head(MixerKind::HGRN2, 40, 5, rng);
  auto gla = hgrn2;
  for (std::size_t t = 0; t < gla.length(); ++t) gla.tokens[t].k = sub(TD::full({5}, 1.0), *gla.gates[t].alpha);
  EXPECT_LE(relative_error(scan_head(MixerKind::HGRN2, hgrn2), scan_head(MixerKind::GLA, gla)), 1e-12);
}

// ---------------------------------------------------------------------------
// delta-rule properties

TEST(DeltaRule, ProjectorContraction) {
  Rng rng(40);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d = 2 + static_cast<std::size_t>(trial % 7);
    const TD k = unit(rng.normal_tensor({d}));
    const double beta = trial == 0 ? 0.0 : trial == 1 ? 1.0 : rng.uniform(0.0, 1.0);
    const TD proj = sub(TD::identity(d), scale(outer(k, k), beta));
    // Along k: singular value 1 - beta.
    const TD pk = matmul(proj, k);
    double along = 0.0;
    for (double x : pk.data()) along += x * x;
    EXPECT_NEAR(std::sqrt(along), 1.0 - beta, 1e-10);
    // Largest singular value by power iteration on proj^T proj.
    TD x = rng.normal_tensor({d});
    const TD gram = matmul(transpose(proj), proj);
    double sigma2 = 0.0;
    for (int it = 0; it < 500; ++it) {
      TD y = matmul(gram, x);
      double n = 0.0;
      for (double e : y.data()) n += e * e;
      n = std::sqrt(n);
      sigma2 = n;
      x = scale(y, 1.0 / n);
    }
    EXPECT_NEAR(std::sqrt(sigma2), 1.0, 1e-10) << "beta " << beta;
  }
}

TEST(DeltaRule, StateNormIsBounded) {
  for (auto kind : {MixerKind::DeltaNet, MixerKind::GatedDeltaNet}) {
    Rng rng(41);
    auto seq = random_head(kind, 64, 6, rng);
    MixerState<TD> s = init_state<double>(kind, Dimensions::from_model(6, 1));
    auto fro = [](const TD& m) { return std::sqrt(sum(mul(m, m))[0]); };
    for (std::size_t t = 0; t < seq.length(); ++t) {
      auto r = step(kind, s, seq.tokens[t], seq.gates[t]);
      const double bound = fro(s.value) + (*seq.gates[t].beta)[0] * fro(seq.tokens[t].v);
      EXPECT_LE(fro(r.state.value), bound * (1 + 1e-12));
      s = r.state;
    }
  }
}

// ---------------------------------------------------------------------------
// chunked path

class ChunkedTest : public ::testing::TestWithParam<MixerKind> {};

TEST_P(ChunkedTest, MatchesScanForEveryChunkSize) {
  const MixerKind kind = GetParam();
  Rng rng(50);
  auto seq = random_head(kind, 64, 6, rng);
  const TD reference = scan_head(kind, seq);
  for (std::size_t chunk : {1u, 5u, 16u, 63u, 64u, 100u})
    EXPECT_LE(relative_error(scan_chunked_head(kind, seq, chunk), reference), 1e-10) << "chunk " << chunk;
  EXPECT_LE(relative_error(scan_chunked_head(kind, seq, 64), oracle_unrolled(kind, seq)), 1e-10);
}

TEST_P(ChunkedTest, ThroughParams) {
  const MixerKind kind = GetParam();
  const auto dims = Dimensions::from_model(8, 2, 30);
  const auto params = random_params(kind, dims, 51);
  Rng rng(52);
  const TD x = rng.normal_tensor({30, 8});
  const auto a = scan(params, x);
  const auto b = scan_chunked(params, x, 7);
  for (std::size_t h = 0; h < 2; ++h) EXPECT_LE(relative_error(b[h], a[h]), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(DecayFamily, ChunkedTest,
                         ::testing::Values(MixerKind::RetNet, MixerKind::GLA, MixerKind::Mamba2, MixerKind::RWKV6,
                                           MixerKind::HGRN2),
                         kind_name);

TEST(Chunked, RejectsUnsupportedKindsAndZeroChunk) {
  Rng rng(53);
  auto seq = random_head(MixerKind::DeltaNet, 4, 2, rng);
  EXPECT_THROW(scan_chunked_head(MixerKind::DeltaNet, seq, 2), ConfigError);
  auto hgrn = random_head(MixerKind::HGRN, 4, 2, rng);
  EXPECT_THROW(scan_chunked_head(MixerKind::HGRN, hgrn, 2), ConfigError);
  auto gla = random_head(MixerKind::GLA, 4, 2, rng);
  EXPECT_THROW(scan_chunked_head(MixerKind::GLA, gla, 0), ConfigError);
}

TEST(Dimensions, Validation) {
  EXPECT_THROW(Dimensions::from_model(6, 4), ConfigError);
  EXPECT_NO_THROW(Dimensions::from_model(1, 1).validate(MixerKind::DeltaNet));
  EXPECT_EQ(generation(MixerKind::Hawk), 1);
  EXPECT_EQ(generation(MixerKind::RWKV6), 2);
  EXPECT_EQ(state_form(MixerKind::GatedDeltaNet), StateForm::Matrix);
  EXPECT_EQ(parse_mixer_kind("Mamba2"), MixerKind::Mamba2);
  EXPECT_FALSE(parse_mixer_kind("Mamba"));
}

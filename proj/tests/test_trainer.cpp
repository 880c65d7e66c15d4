#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "mixerforge/trainer/train.hpp"

using namespace mixerforge;
using TF = Tensor<float>;
using TD = Tensor<double>;

namespace {

HybridConfig tiny_model(MixerKind kind = MixerKind::GLA, RatioSpec ratio = RatioSpec::ratio(1)) {
  HybridConfig c;
  c.kind = kind;
  c.ratio = ratio;
  c.repeats = 1;
  c.depth = 2;
  c.d_model = 16;
  c.heads = 2;
  c.max_len = 16;
  c.vocab = 12;
  c.mlp_mult = 2;
  return c;
}

TaskConfig tiny_task() {
  TaskConfig t;
  t.kind = TaskKind::KvRecall;
  t.vocab = 12;
  t.length = 8;
  t.pairs = 2;
  t.queries = 2;
  return t;
}

OptimizerHyperparams schedule(std::size_t total, double lr = 3e-3) {
  OptimizerHyperparams hp;
  hp.total_steps = total;
  hp.base_lr = lr;
  hp.min_lr = lr / 10;
  return hp;
}

TrainOptions small_options() {
  TrainOptions o;
  o.batch_size = 4;
  o.eval_examples = 16;
  o.eval_batch = 8;
  return o;
}

}  // namespace

TEST(CosineLr, ScheduleLandmarks) {
  auto hp = schedule(100, 1e-3);
  hp.min_lr = 1e-4;
  hp.warmup_steps = 10;
  EXPECT_DOUBLE_EQ(cosine_lr(0, hp), 0.0);
  EXPECT_DOUBLE_EQ(cosine_lr(5, hp), 5e-4);
  EXPECT_DOUBLE_EQ(cosine_lr(10, hp), 1e-3);
  EXPECT_NEAR(cosine_lr(55, hp), 5.5e-4, 1e-15);
  EXPECT_NEAR(cosine_lr(100, hp), 1e-4, 1e-15);
  EXPECT_THROW(cosine_lr(101, hp), ConfigError);
  for (std::size_t s = 10; s < 100; ++s) EXPECT_GE(cosine_lr(s, hp), cosine_lr(s + 1, hp));
}

TEST(CosineLr, DefaultWarmupIsFivePercent) {
  EXPECT_EQ(schedule(1000).warmup(), 50u);
  auto hp = schedule(20);
  hp.warmup_steps = 20;
  EXPECT_DOUBLE_EQ(cosine_lr(20, hp), hp.base_lr);
  hp.warmup_steps = 21;
  EXPECT_THROW(hp.validate(), ConfigError);
}

TEST(AdamW, FirstStepHandExamples) {
  OptimizerHyperparams hp;
  hp.weight_decay = 0.0;
  NamedTensors<TD> params{{"w", TD(Shape{1}, 1.0)}};
  auto state = init_adam(params);
  adamw_step(params, NamedTensors<TD>{{"w", TD(Shape{1}, 1.0)}}, state, 1, 0.1, hp);
  EXPECT_NEAR(params.at("w")[0], 0.9, 1e-8);
  EXPECT_EQ(state.step, 1u);

  NamedTensors<TD> still{{"w", TD(Shape{1}, 2.0)}};
  auto s2 = init_adam(still);
  adamw_step(still, NamedTensors<TD>{{"w", TD(Shape{1}, 0.0)}}, s2, 1, 0.1, hp);
  EXPECT_EQ(still.at("w")[0], 2.0);

  hp.weight_decay = 0.5;
  adamw_step(still, NamedTensors<TD>{{"w", TD(Shape{1}, 0.0)}}, s2, 2, 0.1, hp);
  EXPECT_NEAR(still.at("w")[0], 2.0 * (1 - 0.1 * 0.5), 1e-15);
}

TEST(AdamW, MatchesReferenceOverSeveralSteps) {
  OptimizerHyperparams hp;
  NamedTensors<TD> params{{"w", TD(Shape{2}, 0.5)}};
  auto state = init_adam(params);
  double w = 0.5, m = 0, v = 0;
  const double grads[] = {0.3, -1.2, 0.7, 0.05};
  for (std::size_t t = 1; t <= 4; ++t) {
    const double g = grads[t - 1];
    adamw_step(params, NamedTensors<TD>{{"w", TD(Shape{2}, g)}}, state, t, 0.01, hp);
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w -= 0.01 * (mh / (std::sqrt(vh) + 1e-8) + 0.01 * w);
  }
  EXPECT_NEAR(params.at("w")[0], w, 1e-14);
  EXPECT_NEAR(params.at("w")[1], w, 1e-14);
}

TEST(AdamW, NonFiniteGradientLeavesEverythingUntouched) {
  NamedTensors<TD> params{{"a", TD(Shape{2}, 1.0)}, {"b", TD(Shape{2}, 1.0)}};
  auto state = init_adam(params);
  const auto p0 = params;
  const auto s0 = state;
  TD bad(Shape{2}, 0.1);
  bad[1] = NAN;
  EXPECT_THROW(adamw_step(params, NamedTensors<TD>{{"a", TD(Shape{2}, 0.1)}, {"b", bad}}, state, 1, 0.1, {}),
               NumericError);
  EXPECT_EQ(params, p0);
  EXPECT_EQ(state, s0);
  EXPECT_THROW(adamw_step(params, NamedTensors<TD>{{"zz", TD(Shape{2}, 0.1)}}, state, 1, 0.1, {}), ConfigError);
  EXPECT_THROW(adamw_step(params, NamedTensors<TD>{{"a", TD(Shape{3}, 0.1)}}, state, 1, 0.1, {}), ShapeError);
}

TEST(ClipGlobalNorm, RescalesOnlyAboveThreshold) {
  NamedTensors<TD> g{{"a", TD(Shape{2}, 3.0)}, {"b", TD(Shape{1}, 0.0)}};
  g.at("b")[0] = std::sqrt(7.0);
  EXPECT_NEAR(clip_global_norm(g, 10.0), 5.0, 1e-12);
  EXPECT_EQ(g.at("a")[0], 3.0);
  EXPECT_NEAR(clip_global_norm(g, 1.0), 5.0, 1e-12);
  EXPECT_NEAR(global_norm(g), 1.0, 1e-12);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  auto hp = schedule(5, 0.0);
  hp.min_lr = 0.0;
  const auto r = train<float>(tiny_model(), tiny_task(), hp, 3, small_options());
  EXPECT_EQ(r.model.params(), HybridModel<float>(tiny_model(), derive_seed(3, 0)).params());
  EXPECT_EQ(r.report.steps_completed, 5u);
  EXPECT_EQ(r.optimizer.step, 5u);
}

TEST(Train, OverfitsSingleBatch) {
  auto opts = small_options();
  opts.fixed_batch = true;
  const auto task = tiny_task();
  const auto r = train<float>(tiny_model(), task, schedule(500, 1e-2), 1, opts);
  ASSERT_FALSE(r.report.diverged) << r.report.error;
  auto batch = task;
  batch.examples = opts.batch_size;
  batch.seed = derive_seed(1, 1);
  EXPECT_EQ(score_model(r.model, generate(batch)).accuracy, 1.0);
  EXPECT_LT(r.report.losses.back(), 0.1 * r.report.losses.front());
  const auto& L = r.report.losses;
  for (std::size_t i = 0; i + 50 < L.size(); ++i) EXPECT_LE(L[i + 50], L[i]) << "step " << i + 1;
}

TEST(Train, LossTrendsDown) {
  const auto r = train<float>(tiny_model(), tiny_task(), schedule(150, 1e-2), 2, small_options());
  const auto& L = r.report.losses;
  ASSERT_EQ(L.size(), 150u);
  auto window = [&](std::size_t a) {
    double s = 0;
    for (std::size_t i = a; i < a + 50; ++i) s += L[i];
    return s / 50;
  };
  EXPECT_LE(window(100), window(0));
  EXPECT_TRUE(r.report.metrics.contains("accuracy"));
  EXPECT_TRUE(r.report.metrics.contains("token_loss"));
}

TEST(Train, SameSeedIsBitIdentical) {
  const auto a = train<float>(tiny_model(MixerKind::DeltaNet), tiny_task(), schedule(20), 9, small_options());
  const auto b = train<float>(tiny_model(MixerKind::DeltaNet), tiny_task(), schedule(20), 9, small_options());
  EXPECT_TRUE(a.report.same_outcome(b.report));
  EXPECT_EQ(a.model.params(), b.model.params());
  const auto c = train<float>(tiny_model(MixerKind::DeltaNet), tiny_task(), schedule(20), 10, small_options());
  EXPECT_FALSE(a.report.same_outcome(c.report));
}

TEST(Train, CheckpointCarriesOptimizerState) {
  const auto path = std::filesystem::temp_directory_path() / "mixerforge_trainer_ckpt.txt";
  auto opts = small_options();
  opts.checkpoint_path = path.string();
  const auto r = train<float>(tiny_model(), tiny_task(), schedule(6), 4, opts);
  const auto ck = load_checkpoint<float>(path);
  EXPECT_EQ(adam_state_from_checkpoint(ck), r.optimizer);
  EXPECT_EQ(model_from_checkpoint(ck).params(), r.model.params());
  EXPECT_EQ(ck.header.at("optimizer").get<OptimizerHyperparams>().total_steps, 6u);
  std::filesystem::remove(path);
}

TEST(Train, DivergenceRestoresLastGoodState) {
  GradientHook<float> poison = [](std::size_t step, NamedTensors<TF>& grads) {
    if (step == 4) grads.begin()->second[0] = INFINITY;
  };
  const auto clean = train<float>(tiny_model(), tiny_task(), schedule(3), 5, small_options());
  auto hp = schedule(3);
  hp.total_steps = 10;
  const auto r = train<float>(tiny_model(), tiny_task(), hp, 5, small_options(), poison);
  EXPECT_TRUE(r.report.diverged);
  EXPECT_EQ(r.report.steps_completed, 3u);
  EXPECT_NE(r.report.error.find("step 4"), std::string::npos);
  EXPECT_TRUE(r.report.metrics.empty());
  EXPECT_EQ(r.optimizer.step, 3u);
  for (const auto& [name, p] : r.model.params()) EXPECT_TRUE(std::isfinite(p[0])) << name;
  EXPECT_EQ(clean.report.losses.front(), r.report.losses.front());
}

TEST(Train, RetNetDecayStaysFixed) {
  const auto cfg = tiny_model(MixerKind::RetNet);
  const auto r = train<float>(cfg, tiny_task(), schedule(10, 1e-2), 6, small_options());
  const HybridModel<float> init(cfg, derive_seed(6, 0));
  std::size_t seen = 0;
  for (const auto& [name, p] : r.model.params())
    if (name.ends_with("gamma")) {
      EXPECT_EQ(p, init.params().at(name)) << name;
      EXPECT_FALSE(r.optimizer.m.contains(name) && r.optimizer.m.at(name) != TF(p.shape(), 0.0f));
      ++seen;
    }
  EXPECT_GT(seen, 0u);
}

TEST(Train, RejectsInconsistentConfigs) {
  auto task = tiny_task();
  task.vocab = 20;
  EXPECT_THROW(train<float>(tiny_model(), task, schedule(2), 0, small_options()), ConfigError);
  task = tiny_task();
  task.length = 17;
  task.pairs = 2;
  EXPECT_THROW(train<float>(tiny_model(), task, schedule(2), 0, small_options()), ConfigError);
  auto opts = small_options();
  opts.batch_size = 0;
  EXPECT_THROW(train<float>(tiny_model(), tiny_task(), schedule(2), 0, opts), ConfigError);
}

TEST(TrainOptionsJson, Strict) {
  TrainOptions o;
  o.batch_size = 3;
  const nlohmann::json j = o;
  EXPECT_EQ(j.get<TrainOptions>().batch_size, 3u);
  EXPECT_THROW((nlohmann::json{{"batchsize", 2}}.get<TrainOptions>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"total_steps", "x"}}.get<OptimizerHyperparams>()), ConfigError);
}

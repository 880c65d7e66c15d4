#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "mixerforge/tasks/tasks.hpp"

using namespace mixerforge;
using TD = Tensor<double>;

namespace {

TaskConfig kv_config(std::size_t pairs = 6, std::size_t queries = 3, std::size_t length = 24, std::size_t vocab = 20) {
  TaskConfig c;
  c.kind = TaskKind::KvRecall;
  c.pairs = pairs;
  c.queries = queries;
  c.length = length;
  c.vocab = vocab;
  c.examples = 50;
  c.seed = 7;
  return c;
}

/// Walks each KV_RECALL input and re-derives the supervised targets.
bool kv_targets_rederivable(const Dataset& d) {
  for (std::size_t e = 0; e < d.size(); ++e) {
    const auto& in = d.inputs[e];
    const auto& tg = d.targets[e];
    std::size_t sep = 0;
    while (sep < in.size() && in[sep] != kSeparator) ++sep;
    if (sep == in.size() || sep % 2 != 0) return false;
    std::map<int, int> table;
    for (std::size_t i = 0; i < sep; i += 2) table[in[i]] = in[i + 1];
    for (std::size_t t = 0; t < in.size(); ++t) {
      int expected = kIgnoreIndex;
      if (t > sep && in[t] != kSeparator) {
        auto it = table.find(in[t]);
        if (it == table.end()) return false;
        expected = it->second;
      }
      if (tg[t] != expected) return false;
    }
  }
  return true;
}

bool copy_targets_rederivable(const Dataset& d) {
  for (std::size_t e = 0; e < d.size(); ++e) {
    const auto& in = d.inputs[e];
    const auto& tg = d.targets[e];
    std::size_t P = 0;
    while (P < in.size() && in[P] != kSeparator) ++P;
    for (std::size_t t = 0; t < in.size(); ++t) {
      const int expected = (t >= P && t < 2 * P) ? in[t - P] : kIgnoreIndex;
      if (tg[t] != expected) return false;
      if (t > P && t < 2 * P && in[t] != in[t - P - 1]) return false;
    }
  }
  return true;
}

Predictor<double> constant_logits(std::size_t vocab) {
  return [vocab](const std::vector<int>& in) { return TD(Shape{in.size(), vocab}, 0.0); };
}

}  // namespace

TEST(KvRecall, HandExample) {
  const auto [in, tgt] = kv_recall_sequence({{7, 3}, {9, 5}}, {9}, 8);
  EXPECT_EQ(in, (std::vector<int>{7, 3, 9, 5, kSeparator, 9, kSeparator, kSeparator}));
  EXPECT_EQ(tgt, (std::vector<int>{-1, -1, -1, -1, -1, 5, -1, -1}));
}

TEST(KvRecall, TargetsAreRederivable) {
  const auto d = generate(kv_config());
  ASSERT_EQ(d.size(), 50u);
  EXPECT_TRUE(kv_targets_rederivable(d));
  EXPECT_EQ(d.supervised(), 50u * 3);
}

TEST(KvRecall, KeysDistinctAndRangesDisjoint) {
  const auto c = kv_config(9, 9, 28, 21);
  const auto d = generate(c);
  for (const auto& in : d.inputs) {
    std::set<int> keys;
    for (std::size_t i = 0; i < 2 * c.pairs; i += 2) {
      EXPECT_GE(in[i], 1);
      EXPECT_LE(in[i], static_cast<int>(c.key_count()));
      EXPECT_GT(in[i + 1], static_cast<int>(c.key_count()));
      EXPECT_LT(in[i + 1], static_cast<int>(c.vocab));
      keys.insert(in[i]);
    }
    EXPECT_EQ(keys.size(), c.pairs);
  }
}

TEST(KvRecall, CapacityViolationsThrow) {
  EXPECT_THROW(generate(kv_config(8, 4, 20)), ConfigError);  // 16 + 4 + 1 > 20
  EXPECT_NO_THROW(generate(kv_config(8, 3, 20)));
  EXPECT_THROW(generate(kv_config(4, 5)), ConfigError);
  EXPECT_THROW(generate(kv_config(10, 2, 64, 20)), ConfigError);  // only 9 keys
  EXPECT_THROW(kv_recall_sequence({{1, 2}}, {3}, 8), ConfigError);
}

TEST(KvRecall, SameSeedIsBitIdentical) {
  EXPECT_EQ(generate(kv_config()), generate(kv_config()));
  auto other = kv_config();
  other.seed = 8;
  EXPECT_NE(generate(kv_config()), generate(other));
  auto eval = kv_config();
  eval.split = Split::Eval;
  EXPECT_NE(generate(kv_config()), generate(eval));
}

TEST(Copy, HandExample) {
  const auto [in, tgt] = copy_sequence({4, 2, 4}, 8);
  EXPECT_EQ(in, (std::vector<int>{4, 2, 4, kSeparator, 4, 2, kSeparator, kSeparator}));
  EXPECT_EQ(tgt, (std::vector<int>{-1, -1, -1, 4, 2, 4, -1, -1}));
}

TEST(Copy, TargetsAreRederivable) {
  TaskConfig c;
  c.kind = TaskKind::Copy;
  c.vocab = 9;
  c.length = 17;
  c.examples = 40;
  const auto d = generate(c);
  EXPECT_TRUE(copy_targets_rederivable(d));
  EXPECT_EQ(d.supervised(), 40u * 8);
  c.copy_length = 9;
  EXPECT_THROW(generate(c), ConfigError);
}

TEST(CharLm, NextCharacterTargets) {
  const std::string text = load_corpus();
  EXPECT_GT(text.size(), 80000u);
  const CharVocab vocab(text);
  TaskConfig c;
  c.kind = TaskKind::CharLm;
  c.vocab = vocab.size();
  c.length = 40;
  c.examples = 20;
  for (Split split : {Split::Train, Split::Eval}) {
    c.split = split;
    const auto d = generate(c);
    const auto [lo, hi] = corpus_range(text.size(), split);
    for (std::size_t e = 0; e < d.size(); ++e) {
      std::string window;
      for (int id : d.inputs[e]) window += vocab.decode(id);
      window += vocab.decode(d.targets[e].back());
      const auto at = text.find(window, lo);
      ASSERT_NE(at, std::string::npos);
      EXPECT_LE(at + window.size(), hi);
      for (std::size_t t = 0; t + 1 < c.length; ++t) EXPECT_EQ(d.targets[e][t], d.inputs[e][t + 1]);
    }
  }
  EXPECT_EQ(task_vocab(c), vocab.size());
  c.vocab = vocab.size() - 1;
  EXPECT_THROW(generate(c), ConfigError);
}

TEST(CharLm, MissingCorpusThrows) {
  TaskConfig c;
  c.kind = TaskKind::CharLm;
  c.corpus = "/nonexistent/corpus.txt";
  EXPECT_THROW(generate(c), InputError);
}

TEST(DatasetFormat, RoundTrip) {
  const auto d = generate(kv_config());
  std::stringstream ss;
  write_dataset(ss, d);
  EXPECT_EQ(read_dataset(ss), d);
  std::istringstream first_line("1 2 3\n-1 4 -1\n");
  const auto small = read_dataset(first_line);
  EXPECT_EQ(small.inputs, (std::vector<std::vector<int>>{{1, 2, 3}}));
  EXPECT_EQ(small.targets, (std::vector<std::vector<int>>{{-1, 4, -1}}));
}

TEST(DatasetFormat, RejectsMalformed) {
  for (const char* text : {"1 2\n-1\n", "1 2\n", "1 x\n-1 -1\n", "1 2\n-2 1\n", "-1 2\n-1 -1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(read_dataset(in), InputError) << text;
  }
}

TEST(Evaluate, PerfectPredictorScoresOne) {
  const auto d = generate(kv_config());
  const std::size_t V = 20;
  std::size_t calls = 0;
  Predictor<double> oracle = [&](const std::vector<int>& in) {
    // Looks the answer up in the sequence itself.
    TD out(Shape{in.size(), V}, 0.0);
    for (std::size_t e = 0; e < d.size(); ++e)
      if (d.inputs[e] == in)
        for (std::size_t t = 0; t < in.size(); ++t)
          if (d.targets[e][t] >= 0) out.at(t, static_cast<std::size_t>(d.targets[e][t])) = 1.0;
    ++calls;
    return out;
  };
  EXPECT_EQ(evaluate(oracle, d, Metric::Accuracy), 1.0);
  EXPECT_EQ(calls, d.size());
}

TEST(Evaluate, UniformLogitsGiveLogV) {
  const auto d = generate(kv_config());
  EXPECT_NEAR(evaluate(constant_logits(20), d, Metric::TokenLoss), std::log(20.0), 1e-12);
  EXPECT_NEAR(evaluate(constant_logits(37), d, Metric::TokenLoss), std::log(37.0), 1e-12);
}

TEST(Evaluate, RandomGuessingIsAboutOneOverV) {
  auto c = kv_config(6, 6, 24, 41);
  c.examples = 2000;
  const auto d = generate(c);
  const std::size_t V = 41;
  Rng rng(3);
  Predictor<double> guess = [&](const std::vector<int>& in) { return rng.normal_tensor(Shape{in.size(), V}); };
  const double acc = evaluate(guess, d, Metric::Accuracy);
  const double n = static_cast<double>(d.supervised());
  const double p = 1.0 / static_cast<double>(V);
  EXPECT_NEAR(acc, p, 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST(Evaluate, PermutationInvariant) {
  const auto d = generate(kv_config());
  Predictor<double> f = [](const std::vector<int>& in) {
    TD out(Shape{in.size(), 20});
    for (std::size_t t = 0; t < in.size(); ++t)
      for (std::size_t v = 0; v < 20; ++v) out.at(t, v) = std::sin(static_cast<double>(in[t] * 7 + static_cast<int>(v) * 3 + static_cast<int>(t)));
    return out;
  };
  Dataset reversed{{d.inputs.rbegin(), d.inputs.rend()}, {d.targets.rbegin(), d.targets.rend()}};
  const auto a = score_dataset(f, d), b = score_dataset(f, reversed);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_NEAR(a.token_loss, b.token_loss, 1e-12);
}

TEST(Evaluate, RejectsBadInputs) {
  const auto d = generate(kv_config());
  EXPECT_THROW(evaluate(constant_logits(10), d, Metric::Accuracy), InputError);
  Predictor<double> wrong = [](const std::vector<int>&) { return TD(Shape{2, 20}); };
  EXPECT_THROW(evaluate(wrong, d, Metric::Accuracy), ShapeError);
  EXPECT_THROW(evaluate(constant_logits(20), Dataset{{{1, 2}}, {{-1, -1}}}, Metric::Accuracy), InputError);
}

TEST(TaskConfigJson, StrictRoundTrip) {
  const auto c = kv_config();
  const nlohmann::json j = c;
  const auto back = j.get<TaskConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_THROW((nlohmann::json{{"kind", "KV_RECALL"}, {"pairz", 3}}.get<TaskConfig>()), ConfigError);
  EXPECT_THROW((nlohmann::json{{"kind", "MQAR"}}.get<TaskConfig>()), ConfigError);
}

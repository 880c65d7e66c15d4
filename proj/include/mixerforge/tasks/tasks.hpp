#pragma once

#include <algorithm>
#include <array>
#include <concepts>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mixerforge/hybrid/config.hpp"
#include "mixerforge/numerics/ops.hpp"
#include "mixerforge/numerics/random.hpp"

#ifndef MIXERFORGE_CORPUS_PATH
#define MIXERFORGE_CORPUS_PATH "data/corpus.txt"
#endif

namespace mixerforge {

inline constexpr int kIgnoreIndex = -1;
inline constexpr int kSeparator = 0;

enum class TaskKind { KvRecall, Copy, CharLm };
enum class Split { Train, Eval };

inline std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::KvRecall: return "KV_RECALL";
    case TaskKind::Copy: return "COPY";
    case TaskKind::CharLm: return "CHAR_LM";
  }
  return "?";
}

inline TaskKind parse_task_kind(const std::string& name) {
  if (name == "KV_RECALL") return TaskKind::KvRecall;
  if (name == "COPY") return TaskKind::Copy;
  if (name == "CHAR_LM") return TaskKind::CharLm;
  throw ConfigError("unknown task '" + name + "' (expected KV_RECALL, COPY or CHAR_LM)");
}

struct TaskConfig {
  TaskKind kind = TaskKind::KvRecall;
  std::size_t vocab = 32;
  std::size_t length = 32;
  std::size_t pairs = 8;       // KV_RECALL
  std::size_t queries = 4;     // KV_RECALL
  std::size_t copy_length = 0;  // COPY prefix; 0 means as long as fits
  std::size_t examples = 64;
  std::string corpus;  // CHAR_LM; empty selects the bundled text
  std::uint64_t seed = 0;
  Split split = Split::Train;

  /// KV_RECALL: keys are [1, 1 + key_count), values the rest above them.
  [[nodiscard]] std::size_t key_count() const { return (vocab - 1) / 2; }
  [[nodiscard]] std::size_t value_count() const { return vocab - 1 - key_count(); }
  [[nodiscard]] std::size_t copy_prefix() const { return copy_length ? copy_length : length / 2; }

  void validate() const {
    if (length == 0) throw ConfigError("task length must be positive");
    if (examples == 0) throw ConfigError("task examples must be positive");
    switch (kind) {
      case TaskKind::KvRecall:
        if (vocab < 3) throw ConfigError("KV_RECALL needs vocab >= 3");
        if (pairs == 0 || queries == 0) throw ConfigError("KV_RECALL needs at least one pair and one query");
        if (queries > pairs) throw ConfigError("KV_RECALL queries must not exceed pairs");
        if (pairs > key_count())
          throw ConfigError("KV_RECALL: " + std::to_string(pairs) + " distinct keys need vocab >= " +
                            std::to_string(2 * pairs + 1));
        if (2 * pairs + queries + 1 > length)
          throw ConfigError("KV_RECALL: 2*pairs + queries + 1 = " + std::to_string(2 * pairs + queries + 1) +
                            " exceeds length " + std::to_string(length));
        break;
      case TaskKind::Copy:
        if (vocab < 2) throw ConfigError("COPY needs vocab >= 2");
        if (copy_prefix() == 0 || 2 * copy_prefix() > length)
          throw ConfigError("COPY: prefix of " + std::to_string(copy_prefix()) + " does not fit twice in length " +
                            std::to_string(length));
        break;
      case TaskKind::CharLm: break;
    }
  }
};

inline void to_json(nlohmann::json& j, const TaskConfig& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)}, {"vocab", c.vocab},       {"length", c.length},
                     {"pairs", c.pairs},          {"queries", c.queries},   {"copy_length", c.copy_length},
                     {"examples", c.examples},    {"corpus", c.corpus},     {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, TaskConfig& c) {
  reject_unknown_keys(j, {"kind", "vocab", "length", "pairs", "queries", "copy_length", "examples", "corpus", "seed"},
                      "task config");
  try {
    if (j.contains("kind")) c.kind = parse_task_kind(j.at("kind").get<std::string>());
    if (j.contains("vocab")) c.vocab = j.at("vocab").get<std::size_t>();
    if (j.contains("length")) c.length = j.at("length").get<std::size_t>();
    if (j.contains("pairs")) c.pairs = j.at("pairs").get<std::size_t>();
    if (j.contains("queries")) c.queries = j.at("queries").get<std::size_t>();
    if (j.contains("copy_length")) c.copy_length = j.at("copy_length").get<std::size_t>();
    if (j.contains("examples")) c.examples = j.at("examples").get<std::size_t>();
    if (j.contains("corpus")) c.corpus = j.at("corpus").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("task config: ") + e.what());
  }
}

/// Inputs and targets of equal length; targets hold kIgnoreIndex where
/// nothing is supervised.
struct Dataset {
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;

  [[nodiscard]] std::size_t size() const { return inputs.size(); }
  [[nodiscard]] std::size_t supervised() const {
    std::size_t n = 0;
    for (const auto& t : targets) n += static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [](int x) { return x != kIgnoreIndex; }));
    return n;
  }
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Character corpus

inline std::string default_corpus_path() { return MIXERFORGE_CORPUS_PATH; }

inline std::string load_corpus(const std::string& path = "") {
  const std::string p = path.empty() ? default_corpus_path() : path;
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open corpus " + p);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  if (text.size() < 2) throw InputError("corpus " + p + " is too short");
  return text;
}

/// Loads each corpus once per process; safe to call from several threads.
inline std::shared_ptr<const std::string> shared_corpus(const std::string& path = "") {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const std::string>> cache;
  const std::string key = path.empty() ? default_corpus_path() : path;
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, std::make_shared<const std::string>(load_corpus(key))).first;
  return it->second;
}

/// Sorted distinct bytes of a text; token id = index in this list.
class CharVocab {
 public:
  explicit CharVocab(const std::string& text) {
    std::array<bool, 256> seen{};
    for (unsigned char c : text) seen[c] = true;
    for (std::size_t c = 0; c < 256; ++c)
      if (seen[c]) chars_.push_back(static_cast<char>(c));
    for (std::size_t i = 0; i < chars_.size(); ++i) index_[static_cast<unsigned char>(chars_[i])] = static_cast<int>(i);
  }

  [[nodiscard]] std::size_t size() const { return chars_.size(); }
  [[nodiscard]] int encode(char c) const {
    const int id = index_[static_cast<unsigned char>(c)];
    if (id < 0) throw InputError(std::string("character not in vocabulary: '") + c + "'");
    return id;
  }
  [[nodiscard]] char decode(int id) const { return chars_.at(static_cast<std::size_t>(id)); }

 private:
  std::vector<char> chars_;
  std::array<int, 256> index_ = make_unset();
  static std::array<int, 256> make_unset() {
    std::array<int, 256> a{};
    a.fill(-1);
    return a;
  }
};

/// The first 90% of the corpus trains, the remainder evaluates.
inline std::pair<std::size_t, std::size_t> corpus_range(std::size_t size, Split split) {
  const std::size_t cut = size - size / 10;
  return split == Split::Train ? std::pair{std::size_t{0}, cut} : std::pair{cut, size};
}

// ---------------------------------------------------------------------------
// Generators

/// One KV_RECALL sequence: pairs, SEP, then the queried keys, padded with
/// SEP. Each query position is supervised with its key's value.
inline std::pair<std::vector<int>, std::vector<int>> kv_recall_sequence(const std::vector<std::pair<int, int>>& pairs,
                                                                        const std::vector<int>& queries,
                                                                        std::size_t length) {
  if (2 * pairs.size() + queries.size() + 1 > length) throw ConfigError("KV_RECALL sequence exceeds length");
  std::vector<int> in(length, kSeparator), tgt(length, kIgnoreIndex);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    in[2 * i] = pairs[i].first;
    in[2 * i + 1] = pairs[i].second;
  }
  const std::size_t q0 = 2 * pairs.size() + 1;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto it = std::find_if(pairs.begin(), pairs.end(), [&](const auto& p) { return p.first == queries[i]; });
    if (it == pairs.end()) throw ConfigError("KV_RECALL query " + std::to_string(queries[i]) + " is not a key");
    in[q0 + i] = queries[i];
    tgt[q0 + i] = it->second;
  }
  return {std::move(in), std::move(tgt)};
}

/// One COPY sequence: prefix, SEP, then the prefix again one token behind
/// its targets, so positions P .. 2P-1 are supervised with the prefix.
inline std::pair<std::vector<int>, std::vector<int>> copy_sequence(const std::vector<int>& prefix, std::size_t length) {
  const std::size_t P = prefix.size();
  if (P == 0 || 2 * P > length) throw ConfigError("COPY prefix does not fit twice in length");
  std::vector<int> in(length, kSeparator), tgt(length, kIgnoreIndex);
  for (std::size_t i = 0; i < P; ++i) {
    in[i] = prefix[i];
    tgt[P + i] = prefix[i];
    if (i + 1 < P) in[P + 1 + i] = prefix[i];
  }
  return {std::move(in), std::move(tgt)};
}

namespace task_detail {

inline std::size_t below(Rng& rng, std::size_t n) { return static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(n) - 1)); }

inline void push(Dataset& out, std::pair<std::vector<int>, std::vector<int>> seq) {
  out.inputs.push_back(std::move(seq.first));
  out.targets.push_back(std::move(seq.second));
}

inline void kv_recall(const TaskConfig& c, Rng& rng, Dataset& out) {
  const std::size_t K = c.key_count(), Vn = c.value_count();
  std::vector<int> keys(K);
  std::iota(keys.begin(), keys.end(), 1);
  for (std::size_t e = 0; e < c.examples; ++e) {
    // Partial Fisher-Yates: the first `pairs` entries become distinct keys.
    for (std::size_t i = 0; i < c.pairs; ++i) std::swap(keys[i], keys[i + below(rng, K - i)]);
    std::vector<std::pair<int, int>> pairs(c.pairs);
    for (std::size_t i = 0; i < c.pairs; ++i) pairs[i] = {keys[i], static_cast<int>(1 + K + below(rng, Vn))};
    std::vector<int> queries(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(c.pairs));
    for (std::size_t i = 0; i < c.queries; ++i) std::swap(queries[i], queries[i + below(rng, c.pairs - i)]);
    queries.resize(c.queries);
    push(out, kv_recall_sequence(pairs, queries, c.length));
  }
}

inline void copy(const TaskConfig& c, Rng& rng, Dataset& out) {
  std::vector<int> prefix(c.copy_prefix());
  for (std::size_t e = 0; e < c.examples; ++e) {
    for (auto& t : prefix) t = static_cast<int>(1 + below(rng, c.vocab - 1));
    push(out, copy_sequence(prefix, c.length));
  }
}

inline void char_lm(const TaskConfig& c, Rng& rng, Dataset& out) {
  const auto corpus = shared_corpus(c.corpus);
  const std::string& text = *corpus;
  const CharVocab vocab(text);
  if (vocab.size() > c.vocab)
    throw ConfigError("CHAR_LM corpus has " + std::to_string(vocab.size()) + " symbols; vocab is " +
                      std::to_string(c.vocab));
  const auto [lo, hi] = corpus_range(text.size(), c.split);
  if (hi - lo < c.length + 1) throw ConfigError("CHAR_LM: corpus split shorter than one window");
  for (std::size_t e = 0; e < c.examples; ++e) {
    const std::size_t start = lo + below(rng, hi - lo - c.length);
    std::vector<int> in(c.length), tgt(c.length);
    for (std::size_t i = 0; i < c.length; ++i) {
      in[i] = vocab.encode(text[start + i]);
      tgt[i] = vocab.encode(text[start + i + 1]);
    }
    push(out, {std::move(in), std::move(tgt)});
  }
}

}  // namespace task_detail

/// Deterministic in (config, seed). The eval split draws from a separate
/// stream, and for CHAR_LM from a held-out slice of the corpus.
inline Dataset generate(const TaskConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, config.split == Split::Train ? 0 : 1));
  Dataset out;
  switch (config.kind) {
    case TaskKind::KvRecall: task_detail::kv_recall(config, rng, out); break;
    case TaskKind::Copy: task_detail::copy(config, rng, out); break;
    case TaskKind::CharLm: task_detail::char_lm(config, rng, out); break;
  }
  return out;
}

/// Vocabulary a model needs for the task.
inline std::size_t task_vocab(const TaskConfig& config) {
  if (config.kind == TaskKind::CharLm) return CharVocab(*shared_corpus(config.corpus)).size();
  return config.vocab;
}

// ---------------------------------------------------------------------------
// Line format: inputs on one line, targets on the next, space separated.

inline void write_dataset(std::ostream& out, const Dataset& d) {
  auto line = [&](const std::vector<int>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
    out << '\n';
  };
  for (std::size_t i = 0; i < d.size(); ++i) {
    line(d.inputs[i]);
    line(d.targets[i]);
  }
}

inline Dataset read_dataset(std::istream& in) {
  Dataset d;
  std::string a, b;
  std::size_t line_no = 0;
  auto parse = [&](const std::string& s, int min_value) {
    std::istringstream ss(s);
    std::vector<int> out;
    std::string tok;
    while (ss >> tok) {
      std::size_t used = 0;
      int v = 0;
      try {
        v = std::stoi(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || v < min_value)
        throw InputError("dataset line " + std::to_string(line_no) + ": bad token '" + tok + "'");
      out.push_back(v);
    }
    return out;
  };
  while (std::getline(in, a)) {
    ++line_no;
    if (a.empty()) continue;
    auto inputs = parse(a, 0);
    if (!std::getline(in, b)) throw InputError("dataset: inputs on line " + std::to_string(line_no) + " have no targets");
    ++line_no;
    auto targets = parse(b, kIgnoreIndex);
    if (inputs.size() != targets.size())
      throw InputError("dataset line " + std::to_string(line_no) + ": targets and inputs differ in length");
    d.inputs.push_back(std::move(inputs));
    d.targets.push_back(std::move(targets));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Metrics

enum class Metric { Accuracy, TokenLoss };

/// Logits (L x V) for one input sequence.
template <std::floating_point T>
using Predictor = std::function<Tensor<T>(const std::vector<int>&)>;

struct Score {
  double accuracy = 0.0;
  double token_loss = 0.0;
  std::size_t supervised = 0;
  [[nodiscard]] double get(Metric m) const { return m == Metric::Accuracy ? accuracy : token_loss; }
};

/// Pools every supervised position of the dataset; logits[e] is L x V for
/// example e. Argmax ties go to the lowest index.
template <std::floating_point T>
Score score_logits(const std::vector<Tensor<T>>& logits, const Dataset& data) {
  if (logits.size() != data.size())
    throw ShapeError("expected logits for " + std::to_string(data.size()) + " examples, got " +
                     std::to_string(logits.size()));
  Score s;
  double correct = 0.0, loss = 0.0;
  for (std::size_t e = 0; e < data.size(); ++e) {
    const Tensor<T>& z = logits[e];
    if (z.rank() != 2 || z.rows() != data.inputs[e].size())
      throw ShapeError("predictor returned " + shape_string(z.shape()) + " for a sequence of " +
                       std::to_string(data.inputs[e].size()));
    const std::size_t V = z.cols();
    for (std::size_t t = 0; t < data.targets[e].size(); ++t) {
      const int target = data.targets[e][t];
      if (target == kIgnoreIndex) continue;
      if (target < 0 || static_cast<std::size_t>(target) >= V)
        throw InputError("target " + std::to_string(target) + " outside model vocabulary " + std::to_string(V));
      std::size_t best = 0;
      double mx = -INFINITY;
      for (std::size_t v = 0; v < V; ++v)
        if (static_cast<double>(z.at(t, v)) > mx) {
          mx = static_cast<double>(z.at(t, v));
          best = v;
        }
      double sum = 0.0;
      for (std::size_t v = 0; v < V; ++v) sum += std::exp(static_cast<double>(z.at(t, v)) - mx);
      loss += std::log(sum) + mx - static_cast<double>(z.at(t, static_cast<std::size_t>(target)));
      correct += best == static_cast<std::size_t>(target) ? 1.0 : 0.0;
      ++s.supervised;
    }
  }
  if (s.supervised == 0) throw InputError("dataset has no supervised positions");
  s.accuracy = correct / static_cast<double>(s.supervised);
  s.token_loss = loss / static_cast<double>(s.supervised);
  return s;
}

template <std::floating_point T>
Score score_dataset(const Predictor<T>& predict, const Dataset& data) {
  std::vector<Tensor<T>> logits;
  logits.reserve(data.size());
  for (const auto& in : data.inputs) logits.push_back(predict(in));
  return score_logits(logits, data);
}

template <std::floating_point T>
double evaluate(const Predictor<T>& predict, const Dataset& data, Metric metric) {
  return score_dataset(predict, data).get(metric);
}

}  // namespace mixerforge

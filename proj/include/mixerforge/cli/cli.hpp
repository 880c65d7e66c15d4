#pragma once

// Command-line driver. Needs CLI11.hpp on the include path.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mixerforge/costmodel/costmodel.hpp"
#include "mixerforge/costmodel/pareto.hpp"
#include "mixerforge/mixers/equivalence.hpp"
#include "mixerforge/trainer/train.hpp"

namespace mixerforge::cli {

enum ExitCode : int { kSuccess = 0, kCheckFailed = 1, kUsageError = 2 };

inline constexpr const char* kCommands[] = {"equiv", "flops", "train", "pareto", "report"};

struct EquivConfig {
  std::vector<std::string> kinds{"HGRN", "Hawk", "RetNet", "Mamba2", "GLA", "RWKV6", "HGRN2", "DeltaNet", "GatedDeltaNet"};
  std::size_t length = 64;
  std::size_t dim = 8;
  std::size_t trials = 100;
  bool inject_fault = false;
};

struct FlopsConfig {
  std::vector<std::string> kinds{"HGRN", "GLA", "HGRN2", "softmax"};
  std::vector<std::string> ratios{"24:1", "12:1", "6:1", "3:1", "pure"};
  std::vector<std::uint64_t> lengths{256, 512, 1024, 2048, 4096, 8192, 16384, 32768};
  std::size_t d_model = 2048;
  std::size_t heads = 4;
  std::size_t depth = 24;
  std::size_t element_bytes = 2;
};

struct SweepConfig {
  HybridConfig model;
  TaskConfig task;
  OptimizerHyperparams optimizer;
  TrainOptions options;
  std::vector<std::string> kinds{"GatedDeltaNet"};
  std::vector<std::string> ratios{"3:1", "pure"};
  std::vector<std::uint64_t> seeds;  // default: the run seed
  std::string metric = "accuracy";   // or token_loss (score = -loss)
};

struct RunConfig {
  std::string command;
  std::string config_path;
  std::string out_dir = "mixerforge_out";
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  EquivConfig equiv;
  FlopsConfig flops;
  SweepConfig sweep;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const EquivConfig& c) {
  j = {{"kinds", c.kinds}, {"length", c.length}, {"dim", c.dim}, {"trials", c.trials}, {"inject_fault", c.inject_fault}};
}

inline void from_json(const nlohmann::json& j, EquivConfig& c) {
  reject_unknown_keys(j, {"kinds", "length", "dim", "trials", "inject_fault"}, "equiv");
  detail::read(j, "kinds", c.kinds, "equiv");
  detail::read(j, "length", c.length, "equiv");
  detail::read(j, "dim", c.dim, "equiv");
  detail::read(j, "trials", c.trials, "equiv");
  detail::read(j, "inject_fault", c.inject_fault, "equiv");
}

inline void to_json(nlohmann::json& j, const FlopsConfig& c) {
  j = {{"kinds", c.kinds},     {"ratios", c.ratios}, {"lengths", c.lengths},
       {"d_model", c.d_model}, {"heads", c.heads},   {"depth", c.depth},
       {"element_bytes", c.element_bytes}};
}

inline void from_json(const nlohmann::json& j, FlopsConfig& c) {
  reject_unknown_keys(j, {"kinds", "ratios", "lengths", "d_model", "heads", "depth", "element_bytes"}, "flops");
  detail::read(j, "kinds", c.kinds, "flops");
  detail::read(j, "ratios", c.ratios, "flops");
  detail::read(j, "lengths", c.lengths, "flops");
  detail::read(j, "d_model", c.d_model, "flops");
  detail::read(j, "heads", c.heads, "flops");
  detail::read(j, "depth", c.depth, "flops");
  detail::read(j, "element_bytes", c.element_bytes, "flops");
}

inline void to_json(nlohmann::json& j, const SweepConfig& c) {
  j = {{"model", c.model}, {"task", c.task},     {"optimizer", c.optimizer}, {"options", c.options},
       {"kinds", c.kinds}, {"ratios", c.ratios}, {"seeds", c.seeds},         {"metric", c.metric}};
}

inline void from_json(const nlohmann::json& j, SweepConfig& c) {
  reject_unknown_keys(j, {"model", "task", "optimizer", "options", "kinds", "ratios", "seeds", "metric"}, "sweep");
  if (j.contains("model")) c.model = j.at("model").get<HybridConfig>();
  if (j.contains("task")) c.task = j.at("task").get<TaskConfig>();
  if (j.contains("optimizer")) c.optimizer = j.at("optimizer").get<OptimizerHyperparams>();
  if (j.contains("options")) c.options = j.at("options").get<TrainOptions>();
  detail::read(j, "kinds", c.kinds, "sweep");
  detail::read(j, "ratios", c.ratios, "sweep");
  detail::read(j, "seeds", c.seeds, "sweep");
  detail::read(j, "metric", c.metric, "sweep");
}

/// The effective configuration document (everything but the command line
/// plumbing).
inline nlohmann::json effective_json(const RunConfig& c) {
  return {{"seed", c.seed}, {"equiv", c.equiv}, {"flops", c.flops}, {"sweep", c.sweep}};
}

/// Sets a dotted key to a value parsed as JSON, or as a string if it does
/// not parse. Every path component must already exist.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!node->is_object() || !node->contains(key)) throw ConfigError("unknown key '" + path + "' in override");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  *node = value.is_discarded() ? nlohmann::json(text) : value;
}

/// Defaults, then the config file, then --seed, then --set overrides.
inline void resolve(RunConfig& run, bool seed_given) {
  nlohmann::json doc = effective_json(run);
  if (!run.config_path.empty()) {
    std::ifstream in(run.config_path);
    if (!in) throw ConfigError("cannot open config file " + run.config_path);
    nlohmann::json file = nlohmann::json::parse(in, nullptr, false);
    if (file.is_discarded()) throw ConfigError("config file " + run.config_path + " is not valid JSON");
    reject_unknown_keys(file, {"seed", "equiv", "flops", "sweep"}, "config file");
    for (const auto& [key, value] : file.items()) {
      if (value.is_object()) {
        reject_unknown_keys(value, [&] {
          std::vector<std::string> keys;
          for (const auto& [k, v] : doc.at(key).items()) keys.push_back(k);
          return keys;
        }(), key);
        doc[key].merge_patch(value);
      } else {
        doc[key] = value;
      }
    }
  }
  if (seed_given) doc["seed"] = run.seed;
  for (const auto& o : run.overrides) apply_override(doc, o);
  detail::read(doc, "seed", run.seed, "config");
  run.equiv = doc.at("equiv").get<EquivConfig>();
  run.flops = doc.at("flops").get<FlopsConfig>();
  run.sweep = doc.at("sweep").get<SweepConfig>();
}

// ---------------------------------------------------------------------------
// helpers

inline MixerKind kind_or_throw(const std::string& name) {
  auto k = parse_mixer_kind(name);
  if (!k) throw ConfigError("unknown mixer kind '" + name + "'");
  return *k;
}

/// MIXERFORGE_THREADS if set (must be a positive integer), else the
/// hardware concurrency.
inline std::size_t thread_cap() {
  if (const char* env = std::getenv("MIXERFORGE_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) throw ConfigError("MIXERFORGE_THREADS must be a positive integer");
    return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs job(i) for i in [0, n) on at most `threads` workers.
template <class Job>
void parallel_for(std::size_t n, std::size_t threads, Job job) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  for (std::size_t w = 0; w < threads; ++w)
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

/// Model for a sweep or cost cell: `base` at `ratio`, keeping its depth.
/// Ratio cells take floor(depth / (r + 1)) repeats, at least one.
inline HybridConfig cell_model(HybridConfig base, MixerKind kind, const std::string& ratio) {
  const std::size_t depth = base.total_layers();
  base.kind = kind;
  base.ratio = RatioSpec::parse(ratio);
  base.depth = depth;
  if (is_single_head(kind)) base.heads = 1;
  if (base.ratio.mode == RatioMode::Ratio) base.repeats = std::max<std::size_t>(1, depth / (base.ratio.r + 1));
  return base;
}

// ---------------------------------------------------------------------------
// commands

inline int cmd_equiv(const RunConfig& run, std::ostream& out) {
  std::vector<MixerKind> kinds;
  for (const auto& k : run.equiv.kinds) kinds.push_back(kind_or_throw(k));
  if (kinds.empty()) throw ConfigError("equiv: empty kind list");
  EquivalenceOptions opt;
  opt.max_length = run.equiv.length;
  opt.max_dim = run.equiv.dim;
  opt.trials = run.equiv.trials;
  opt.seed = run.seed;
  opt.inject_fault = run.equiv.inject_fault;
  std::vector<EquivalenceRow> rows;
  for (auto k : kinds) rows.push_back(oracle_equivalence(k, opt));
  for (auto& r : lattice_equivalence(opt)) rows.push_back(std::move(r));
  std::ostringstream csv;
  csv << "check,trials,max_error,tolerance,pass\n" << std::setprecision(6);
  bool ok = true;
  for (const auto& r : rows) {
    csv << r.check << ',' << r.trials << ',' << r.max_error << ',' << r.tolerance << ',' << (r.passed() ? 1 : 0) << '\n';
    out << (r.passed() ? "ok   " : "FAIL ") << r.check << " max error " << r.max_error << '\n';
    ok = ok && r.passed();
  }
  write_file(std::filesystem::path(run.out_dir) / "equiv.csv", csv.str());
  return ok ? kSuccess : kCheckFailed;
}

inline int cmd_flops(const RunConfig& run, std::ostream& out) {
  const auto& f = run.flops;
  if (f.lengths.empty()) throw ConfigError("flops: empty length grid");
  HybridConfig base;
  base.d_model = f.d_model;
  base.heads = f.heads;
  base.ratio = RatioSpec::full_transformer();
  base.depth = f.depth;
  std::vector<HybridConfig> models;
  bool have_transformer = false;
  auto add_transformer = [&] {
    if (have_transformer) return;
    models.push_back(cell_model(base, MixerKind::GLA, "full"));
    have_transformer = true;
  };
  for (const auto& name : f.kinds) {
    if (name == "softmax") {
      add_transformer();
      continue;
    }
    const MixerKind kind = kind_or_throw(name);
    for (const auto& ratio : f.ratios) {
      if (RatioSpec::parse(ratio).mode == RatioMode::FullTransformer) {
        add_transformer();
        continue;
      }
      auto m = cell_model(base, kind, ratio);
      m.validate();
      models.push_back(m);
    }
  }
  std::ostringstream csv;
  csv << kCostCsvHeader << '\n';
  for (const auto& m : models)
    for (auto L : f.lengths) write_cost_row(csv, cost_label(m), m, model_flops(m, L, f.element_bytes));
  write_file(std::filesystem::path(run.out_dir) / "flops.csv", csv.str());
  out << "wrote " << models.size() * f.lengths.size() << " cost rows\n";
  return kSuccess;
}

struct CellResult {
  std::string label;
  HybridConfig model;
  std::uint64_t seed = 0;
  TrainReport report;
  bool failed = false;
};

inline std::vector<CellResult> run_sweep(const RunConfig& run, std::ostream& out) {
  const auto& s = run.sweep;
  if (s.kinds.empty() || s.ratios.empty()) throw ConfigError("sweep: kinds and ratios must be non-empty");
  if (s.metric != "accuracy" && s.metric != "token_loss") throw ConfigError("sweep: metric must be accuracy or token_loss");
  const auto seeds = s.seeds.empty() ? std::vector<std::uint64_t>{run.seed} : s.seeds;
  std::vector<CellResult> cells;
  for (const auto& k : s.kinds)
    for (const auto& r : s.ratios) {
      auto m = cell_model(s.model, kind_or_throw(k), r);
      m.validate();
      for (auto seed : seeds) cells.push_back({k + "-" + m.ratio.label(), m, seed, {}, false});
    }
  s.task.validate();
  s.optimizer.validate();
  s.options.validate();
  std::mutex log;
  parallel_for(cells.size(), thread_cap(), [&](std::size_t i) {
    auto& c = cells[i];
    auto options = s.options;
    const auto dir = std::filesystem::path(run.out_dir) / "cells" / c.label / ("seed" + std::to_string(c.seed));
    if (!options.checkpoint_path.empty()) options.checkpoint_path = (dir / "checkpoint.txt").string();
    try {
      c.report = train<float>(c.model, s.task, s.optimizer, c.seed, options).report;
      c.failed = c.report.diverged;
    } catch (const Error& e) {
      c.report.seed = c.seed;
      c.report.error = e.what();
      c.failed = true;
    }
    write_file(dir / "report.json", nlohmann::json(c.report).dump(2) + "\n");
    std::lock_guard lock(log);
    out << (c.failed ? "FAIL " : "ok   ") << c.label << " seed " << c.seed;
    if (c.failed) out << ": " << c.report.error;
    else
      for (const auto& [name, v] : c.report.metrics) out << ' ' << name << ' ' << v;
    out << '\n';
  });
  std::ostringstream csv;
  csv << "label,kind,ratio,seed,parameters,steps,final_loss,accuracy,token_loss,failed\n" << std::setprecision(10);
  for (const auto& c : cells) {
    auto metric = [&](const char* k) { return c.report.metrics.contains(k) ? std::to_string(c.report.metrics.at(k)) : ""; };
    csv << c.label << ',' << to_string(c.model.kind) << ',' << c.model.ratio.label() << ',' << c.seed << ','
        << c.report.parameter_count << ',' << c.report.steps_completed << ','
        << (c.report.losses.empty() ? std::string() : std::to_string(c.report.losses.back())) << ','
        << metric("accuracy") << ',' << metric("token_loss") << ',' << (c.failed ? 1 : 0) << '\n';
  }
  write_file(std::filesystem::path(run.out_dir) / "train.csv", csv.str());
  return cells;
}

inline int cmd_train(const RunConfig& run, std::ostream& out) {
  const auto cells = run_sweep(run, out);
  return std::any_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.failed; }) ? kCheckFailed
                                                                                                : kSuccess;
}

/// Trains the grid, averages the metric over seeds per cell, joins it with
/// per-sequence FLOPs at the task length and writes grid.csv and
/// frontier.csv. Failed cells are left out of both.
inline int cmd_pareto(const RunConfig& run, std::ostream& out) {
  const auto cells = run_sweep(run, out);
  std::vector<std::string> labels;
  std::map<std::string, std::pair<double, std::size_t>> sums;
  std::map<std::string, HybridConfig> models;
  std::set<std::string> failed;
  for (const auto& c : cells) {
    if (!sums.contains(c.label)) labels.push_back(c.label);
    auto& [total, count] = sums[c.label];
    models[c.label] = c.model;
    if (c.failed) {
      failed.insert(c.label);
      continue;
    }
    const double v = c.report.metrics.at(run.sweep.metric);
    total += run.sweep.metric == "token_loss" ? -v : v;
    ++count;
  }
  std::vector<ParetoPoint> points;
  for (const auto& label : labels) {
    if (failed.contains(label)) continue;
    const auto cost = model_flops(models.at(label), run.sweep.task.length);
    points.push_back({static_cast<double>(cost.per_sequence_flops), sums.at(label).first / static_cast<double>(sums.at(label).second), label});
  }
  auto write = [&](const char* name, const std::vector<ParetoPoint>& pts) {
    std::ostringstream csv;
    csv << kCostCsvHeader << '\n';
    for (const auto& p : pts) {
      const auto& m = models.at(p.label);
      write_cost_row(csv, p.label, m, model_flops(m, run.sweep.task.length), p.score);
    }
    write_file(std::filesystem::path(run.out_dir) / name, csv.str());
  };
  write("grid.csv", points);
  const auto front = pareto(points);
  write("frontier.csv", front);
  out << "frontier:";
  for (const auto& p : front) out << ' ' << p.label;
  out << '\n';
  return failed.empty() ? kSuccess : kCheckFailed;
}

/// Cost, cache and size summary of the sweep's base model at the task length.
inline int cmd_report(const RunConfig& run, std::ostream& out) {
  const auto& m = run.sweep.model;
  m.validate();
  const std::uint64_t L = run.sweep.task.length;
  const auto cost = model_flops(m, L);
  const HybridModel<float> model(m, derive_seed(run.seed, 0));
  const nlohmann::json j{{"model", m},
                         {"schedule", schedule_string(model.schedule())},
                         {"parameters", model.parameter_count()},
                         {"L", L},
                         {"per_token_flops", cost.per_token_flops},
                         {"per_sequence_flops", cost.per_sequence_flops},
                         {"kv_cache_bytes", cost.kv_cache_bytes},
                         {"recurrent_state_bytes", cost.recurrent_state_bytes},
                         {"exact", cost.exact}};
  write_file(std::filesystem::path(run.out_dir) / "report.json", j.dump(2) + "\n");
  out << j.dump(2) << '\n';
  return kSuccess;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  CLI::App app{"Linear-attention mixers, hybrid stacks, cost model and toy trainer"};
  app.add_option("command", cfg.command, "equiv | flops | train | pareto | report")
      ->required()
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(kCommands), std::end(kCommands))));
  app.add_option("--config", cfg.config_path, "JSON config file");
  app.add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", cfg.seed, "run seed");
  app.add_option("--set", cfg.overrides, "dotted.key=value override (repeatable)")->take_all();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kUsageError;
  }
  try {
    resolve(cfg, seed_opt->count() > 0);
    write_file(std::filesystem::path(cfg.out_dir) / "effective_config.json",
               effective_json(cfg).dump(2) + "\n");
    if (cfg.command == "equiv") return cmd_equiv(cfg, out);
    if (cfg.command == "flops") return cmd_flops(cfg, out);
    if (cfg.command == "train") return cmd_train(cfg, out);
    if (cfg.command == "pareto") return cmd_pareto(cfg, out);
    return cmd_report(cfg, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  }
}

}  // namespace mixerforge::cli

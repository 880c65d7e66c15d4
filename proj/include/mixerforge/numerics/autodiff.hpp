#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mixerforge/numerics/graph.hpp"

namespace mixerforge {

template <class T>
using Bindings = std::map<std::string, Tensor<T>, std::less<>>;

/// Reusable forward/backward workspace over one graph.
///
/// Leaf values are bound by pointer and must stay alive across `forward()`.
/// Buffers are allocated once, so repeated passes over a fixed-shape graph do
/// not allocate.
template <std::floating_point T>
class Evaluator {
 public:
  explicit Evaluator(const Graph& graph)
      : graph_(&graph), values_(graph.nodes().size()), leaves_(graph.leaf_count(), nullptr) {
    for (NodeId id : graph.schedule()) {
      const Node& n = graph.node(id);
      if (n.op == Op::Leaf) continue;
      if (n.op == Op::Constant) {
        const auto& c = graph.constant(n.slot);
        values_[id].assign(c.data().begin(), c.data().end());
      } else {
        values_[id].resize(shape_numel(n.shape));
      }
    }
  }

  void bind(std::size_t leaf, const Tensor<T>& value) {
    if (value.shape() != graph_->leaf_shape(leaf))
      throw ShapeError("binding for '" + graph_->leaf_name(leaf) + "' has shape " + shape_string(value.shape()) +
                       ", expected " + shape_string(graph_->leaf_shape(leaf)));
    leaves_[leaf] = value.data().data();
  }

  void bind(std::string_view name, const Tensor<T>& value) {
    auto idx = graph_->leaf_index(name);
    if (!idx) throw ConfigError("graph has no leaf named '" + std::string(name) + "'");
    bind(*idx, value);
  }

  void bind_all(const Bindings<T>& bindings) {
    for (std::size_t i = 0; i < graph_->leaf_count(); ++i) {
      auto it = bindings.find(graph_->leaf_name(i));
      if (it != bindings.end()) bind(i, it->second);
    }
  }

  /// Evaluates every scheduled node. Throws NumericError on the first
  /// non-finite intermediate.
  void forward() {
    std::vector<ConstView<T>> views;
    for (NodeId id : graph_->schedule()) {
      const Node& n = graph_->node(id);
      if (n.op == Op::Leaf) {
        if (!leaves_[n.slot]) throw ConfigError("unbound leaf '" + graph_->leaf_name(n.slot) + "'");
        continue;
      }
      if (n.op == Op::Constant) continue;
      views.clear();
      for (NodeId in : n.inputs) views.push_back({data(in), &graph_->node(in).shape});
      auto& out = values_[id];
      forward_kernel<T>(n.op, n.attrs, views, out, n.shape);
      for (T x : out)
        if (!std::isfinite(x))
          throw NumericError("non-finite value produced by " + std::string(op_name(n.op)) + " node #" +
                             std::to_string(id));
    }
  }

  /// Reverse-mode pass from the (scalar) root. Gradients are produced for the
  /// leaves flagged in `wanted` (indexed by leaf).
  void backward(const std::vector<bool>& wanted) {
    const Graph& g = *graph_;
    if (shape_numel(g.root_shape()) != 1)
      throw ShapeError("gradient requires a scalar root, got " + shape_string(g.root_shape()));
    const auto& sched = g.schedule();
    needs_.assign(g.nodes().size(), false);
    for (NodeId id : sched) {
      const Node& n = g.node(id);
      if (n.op == Op::Leaf) {
        needs_[id] = n.slot < wanted.size() && wanted[n.slot];
      } else {
        for (NodeId in : n.inputs) needs_[id] = needs_[id] || needs_[in];
      }
    }
    if (grads_.size() != g.nodes().size()) grads_.resize(g.nodes().size());
    for (NodeId id : sched)
      if (needs_[id]) grads_[id].assign(shape_numel(g.node(id).shape), T{0});
    if (!needs_[g.root()]) return;
    grads_[g.root()][0] = T{1};

    std::vector<ConstView<T>> views;
    std::vector<T*> grad_in;
    for (auto it = sched.rbegin(); it != sched.rend(); ++it) {
      const NodeId id = *it;
      const Node& n = g.node(id);
      if (!needs_[id] || n.op == Op::Leaf || n.op == Op::Constant) continue;
      views.clear();
      grad_in.clear();
      for (NodeId in : n.inputs) {
        views.push_back({data(in), &g.node(in).shape});
        grad_in.push_back(needs_[in] ? grads_[in].data() : nullptr);
      }
      backward_kernel<T>(n.op, n.attrs, views, values_[id].data(), grads_[id].data(), n.shape, grad_in);
    }
    for (std::size_t leaf = 0; leaf < g.leaf_count(); ++leaf) {
      const NodeId id = g.leaf_node(leaf);
      if (!needs_[id]) continue;
      for (T x : grads_[id])
        if (!std::isfinite(x)) throw NumericError("non-finite gradient for '" + g.leaf_name(leaf) + "'");
    }
  }

  [[nodiscard]] Tensor<T> value(NodeId id) const {
    const auto& shape = graph_->node(id).shape;
    const T* p = data(id);
    return Tensor<T>(shape, std::vector<T>(p, p + shape_numel(shape)));
  }
  [[nodiscard]] Tensor<T> root_value() const { return value(graph_->root()); }
  [[nodiscard]] T root_scalar() const { return data(graph_->root())[0]; }

  /// Gradient of the root w.r.t. a leaf; zeros if the leaf does not reach it.
  [[nodiscard]] Tensor<T> leaf_grad(std::size_t leaf) const {
    const NodeId id = graph_->leaf_node(leaf);
    if (id < needs_.size() && needs_[id]) return Tensor<T>(graph_->node(id).shape, grads_[id]);
    return Tensor<T>(graph_->node(id).shape, T{0});
  }

  [[nodiscard]] const Graph& graph() const { return *graph_; }

 private:
  [[nodiscard]] const T* data(NodeId id) const {
    const Node& n = graph_->node(id);
    return n.op == Op::Leaf ? leaves_[n.slot] : values_[id].data();
  }

  const Graph* graph_;
  std::vector<std::vector<T>> values_;
  std::vector<const T*> leaves_;
  std::vector<std::vector<T>> grads_;
  std::vector<bool> needs_;
};

/// Root value of `graph` under `bindings`. Pure: bindings are not modified.
template <std::floating_point T>
Tensor<T> evaluate(const Graph& graph, const Bindings<T>& bindings) {
  Evaluator<T> ev(graph);
  ev.bind_all(bindings);
  ev.forward();
  return ev.root_value();
}

/// d(root)/d(leaf) for each leaf named in `wrt`.
template <std::floating_point T>
Bindings<T> gradient(const Graph& graph, const Bindings<T>& bindings, const std::set<std::string>& wrt) {
  Evaluator<T> ev(graph);
  ev.bind_all(bindings);
  std::vector<bool> wanted(graph.leaf_count(), false);
  for (const auto& name : wrt) {
    auto idx = graph.leaf_index(name);
    if (!idx) throw ConfigError("gradient requested for unknown leaf '" + name + "'");
    wanted[*idx] = true;
  }
  ev.forward();
  ev.backward(wanted);
  Bindings<T> out;
  for (const auto& name : wrt) out.emplace(name, ev.leaf_grad(*graph.leaf_index(name)));
  return out;
}

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_leaf;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

struct FdOptions {
  double eps = 1e-6;
  /// Check at most this many randomly chosen coordinates per leaf; 0 checks all.
  std::size_t max_coords_per_leaf = 0;
  std::uint64_t seed = 0;
};

/// Compares reverse-mode gradients against central finite differences.
/// Reports `max |analytic - numeric| / max(|analytic|, 1e-12)` over the
/// checked coordinates; never throws on mismatch.
inline FdReport finite_difference_check(const Graph& graph, const Bindings<double>& bindings,
                                        const std::set<std::string>& wrt, FdOptions options = {}) {
  Bindings<double> work = bindings;
  Evaluator<double> ev(graph);
  ev.bind_all(work);
  std::vector<bool> wanted(graph.leaf_count(), false);
  for (const auto& name : wrt) {
    auto idx = graph.leaf_index(name);
    if (!idx) throw ConfigError("finite_difference_check: unknown leaf '" + name + "'");
    wanted[*idx] = true;
  }
  ev.forward();
  ev.backward(wanted);

  FdReport report;
  std::mt19937_64 rng(options.seed);
  for (const auto& name : wrt) {
    const std::size_t leaf = *graph.leaf_index(name);
    const Tensor<double> analytic = ev.leaf_grad(leaf);
    Tensor<double>& x = work.find(name)->second;
    std::vector<std::size_t> coords(x.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_leaf && coords.size() > options.max_coords_per_leaf) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_leaf);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double saved = x[i];
      x[i] = saved + options.eps;
      ev.forward();
      const double plus = ev.root_scalar();
      x[i] = saved - options.eps;
      ev.forward();
      const double minus = ev.root_scalar();
      x[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(std::abs(analytic[i]), 1e-12);
      ++report.coordinates;
      if (report.worst_leaf.empty() || err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_leaf = name;
        report.worst_index = i;
        report.analytic = analytic[i];
        report.numeric = numeric;
      }
    }
  }
  ev.forward();
  return report;
}

}  // namespace mixerforge

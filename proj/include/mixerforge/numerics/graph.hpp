#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mixerforge/numerics/ops.hpp"
#include "mixerforge/numerics/tensor.hpp"

namespace mixerforge {

using NodeId = std::uint32_t;

struct Node {
  Op op = Op::Leaf;
  std::vector<NodeId> inputs;
  Shape shape;
  OpAttrs attrs;
  std::uint32_t slot = 0;  // leaf index for Op::Leaf, constant index for Op::Constant
};

/// Immutable computation DAG. Nodes are stored in topological order: every
/// input id is smaller than the id of the node that consumes it.
class Graph {
 public:
  Graph() = default;

  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
  [[nodiscard]] const Node& node(NodeId id) const { return nodes_[id]; }
  [[nodiscard]] NodeId root() const { return root_; }
  [[nodiscard]] const Shape& root_shape() const { return nodes_[root_].shape; }

  /// Nodes needed for the root and the retained outputs, in evaluation order.
  [[nodiscard]] const std::vector<NodeId>& schedule() const { return schedule_; }

  [[nodiscard]] std::size_t leaf_count() const { return leaf_names_.size(); }
  [[nodiscard]] const std::string& leaf_name(std::size_t leaf) const { return leaf_names_[leaf]; }
  [[nodiscard]] NodeId leaf_node(std::size_t leaf) const { return leaf_nodes_[leaf]; }
  [[nodiscard]] const Shape& leaf_shape(std::size_t leaf) const { return nodes_[leaf_nodes_[leaf]].shape; }

  [[nodiscard]] std::optional<std::size_t> leaf_index(std::string_view name) const {
    for (std::size_t i = 0; i < leaf_names_.size(); ++i)
      if (leaf_names_[i] == name) return i;
    return std::nullopt;
  }

  [[nodiscard]] const Tensor<double>& constant(std::size_t slot) const { return constants_[slot]; }

 private:
  friend class GraphBuilder;

  std::vector<Node> nodes_;
  std::vector<std::string> leaf_names_;
  std::vector<NodeId> leaf_nodes_;
  std::vector<Tensor<double>> constants_;
  std::vector<NodeId> schedule_;
  NodeId root_ = 0;
};

class GraphBuilder;

/// Symbolic value: a handle to a node inside a GraphBuilder. The builder must
/// outlive every Expr it hands out.
struct Expr {
  GraphBuilder* builder = nullptr;
  NodeId id = 0;

  [[nodiscard]] bool valid() const { return builder != nullptr; }
  [[nodiscard]] const Shape& shape() const;
};

class GraphBuilder {
 public:
  GraphBuilder() = default;
  GraphBuilder(const GraphBuilder&) = delete;
  GraphBuilder& operator=(const GraphBuilder&) = delete;

  Expr leaf(std::string name, Shape shape) {
    validate_shape(shape);
    for (const auto& existing : leaf_names_)
      if (existing == name) throw ConfigError("duplicate leaf name: " + name);
    Node n;
    n.op = Op::Leaf;
    n.shape = std::move(shape);
    n.slot = static_cast<std::uint32_t>(leaf_names_.size());
    leaf_names_.push_back(std::move(name));
    const NodeId id = push(std::move(n));
    leaf_nodes_.push_back(id);
    return {this, id};
  }

  Expr constant(Tensor<double> value) {
    if (value.empty()) throw ShapeError("constant: empty tensor");
    Node n;
    n.op = Op::Constant;
    n.shape = value.shape();
    n.slot = static_cast<std::uint32_t>(constants_.size());
    constants_.push_back(std::move(value));
    return {this, push(std::move(n))};
  }

  /// Constant tensor filled with `value`; identical requests share one node.
  Expr fill(const Shape& shape, double value) {
    auto key = std::make_pair(shape, value);
    if (auto it = fill_cache_.find(key); it != fill_cache_.end()) return {this, it->second};
    Expr e = constant(Tensor<double>(shape, value));
    fill_cache_.emplace(std::move(key), e.id);
    return e;
  }

  Expr apply(Op op, const OpAttrs& attrs, std::span<const Expr> inputs) {
    Node n;
    n.op = op;
    n.attrs = attrs;
    std::vector<const Shape*> shapes;
    shapes.reserve(inputs.size());
    for (const auto& e : inputs) {
      if (e.builder != this) throw ConfigError(std::string(op_name(op)) + ": operand from another graph");
      n.inputs.push_back(e.id);
      shapes.push_back(&nodes_[e.id].shape);
    }
    n.shape = infer_shape(op, shapes, attrs);
    return {this, push(std::move(n))};
  }

  [[nodiscard]] const Shape& shape(NodeId id) const { return nodes_[id].shape; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  /// Freezes the current nodes into a Graph. `outputs` are extra nodes kept
  /// in the evaluation schedule so their values can be read after a pass.
  [[nodiscard]] Graph build(const Expr& root, std::span<const Expr> outputs = {}) const {
    Graph g;
    g.nodes_ = nodes_;
    g.leaf_names_ = leaf_names_;
    g.leaf_nodes_ = leaf_nodes_;
    g.constants_ = constants_;
    g.root_ = root.id;
    std::vector<bool> needed(nodes_.size(), false);
    needed[root.id] = true;
    for (const auto& o : outputs) needed[o.id] = true;
    for (std::size_t i = nodes_.size(); i-- > 0;)
      if (needed[i])
        for (auto in : nodes_[i].inputs) needed[in] = true;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (needed[i]) g.schedule_.push_back(static_cast<NodeId>(i));
    return g;
  }

 private:
  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
  std::vector<std::string> leaf_names_;
  std::vector<NodeId> leaf_nodes_;
  std::vector<Tensor<double>> constants_;
  std::map<std::pair<Shape, double>, NodeId> fill_cache_;
};

inline const Shape& Expr::shape() const { return builder->shape(id); }

// ---------------------------------------------------------------------------
// Symbolic counterparts of the eager tensor operations. Generic code written
// against these names runs unchanged on Tensor<T> (eager) and Expr (graph).
// ---------------------------------------------------------------------------

namespace detail {
inline Expr apply_expr(Op op, const OpAttrs& attrs, std::initializer_list<Expr> in) {
  return in.begin()->builder->apply(op, attrs, std::span<const Expr>(in.begin(), in.size()));
}
}  // namespace detail

inline Expr matmul(const Expr& a, const Expr& b) { return detail::apply_expr(Op::MatMul, {}, {a, b}); }
inline Expr outer(const Expr& a, const Expr& b) { return detail::apply_expr(Op::Outer, {}, {a, b}); }
inline Expr mul(const Expr& a, const Expr& b) { return detail::apply_expr(Op::Mul, {}, {a, b}); }
inline Expr add(const Expr& a, const Expr& b) { return detail::apply_expr(Op::Add, {}, {a, b}); }
inline Expr sub(const Expr& a, const Expr& b) { return detail::apply_expr(Op::Sub, {}, {a, b}); }
inline Expr sigmoid(const Expr& a) { return detail::apply_expr(Op::Sigmoid, {}, {a}); }
inline Expr exp(const Expr& a) { return detail::apply_expr(Op::Exp, {}, {a}); }
inline Expr log(const Expr& a) { return detail::apply_expr(Op::Log, {}, {a}); }
inline Expr rsqrt(const Expr& a) { return detail::apply_expr(Op::Rsqrt, {}, {a}); }
inline Expr row_softmax(const Expr& a, bool causal = false) {
  OpAttrs attrs;
  attrs.causal = causal;
  return detail::apply_expr(Op::RowSoftmax, attrs, {a});
}
inline Expr log_softmax(const Expr& a) { return detail::apply_expr(Op::LogSoftmax, {}, {a}); }
inline Expr sum(const Expr& a) { return detail::apply_expr(Op::Sum, {}, {a}); }
inline Expr scale(const Expr& a, double factor) {
  OpAttrs attrs;
  attrs.factor = factor;
  return detail::apply_expr(Op::Scale, attrs, {a});
}
inline Expr scale_by(const Expr& s, const Expr& a) { return detail::apply_expr(Op::ScaleBy, {}, {s, a}); }
inline Expr transpose(const Expr& a) { return detail::apply_expr(Op::Transpose, {}, {a}); }
inline Expr slice(const Expr& a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  OpAttrs attrs;
  attrs.r0 = r0, attrs.r1 = r1, attrs.c0 = c0, attrs.c1 = c1;
  return detail::apply_expr(Op::Slice, attrs, {a});
}
inline Expr row(const Expr& a, std::size_t r, std::size_t c0, std::size_t c1) {
  OpAttrs attrs;
  attrs.r0 = r, attrs.r1 = r + 1, attrs.c0 = c0, attrs.c1 = c1, attrs.as_vector = true;
  return detail::apply_expr(Op::Slice, attrs, {a});
}
inline Expr segment(const Expr& a, std::size_t c0, std::size_t c1) {
  OpAttrs attrs;
  attrs.c0 = c0, attrs.c1 = c1;
  return detail::apply_expr(Op::Slice, attrs, {a});
}
inline Expr concat_rows(const std::vector<Expr>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  return parts.front().builder->apply(Op::ConcatRows, {}, parts);
}
inline Expr concat_cols(const std::vector<Expr>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  return parts.front().builder->apply(Op::ConcatCols, {}, parts);
}
inline Expr recurrence(const Expr& q, const Expr& k, const Expr& v, const Expr& a, const Expr& e, const Expr& w) {
  return detail::apply_expr(Op::Recurrence, {}, {q, k, v, a, e, w});
}
inline Expr fill_like(const Expr& like, Shape shape, double value) { return like.builder->fill(shape, value); }
inline Expr constant_like(const Expr& like, const Tensor<double>& value) {
  return like.builder->constant(value);
}

}  // namespace mixerforge

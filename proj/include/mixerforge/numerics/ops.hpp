#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mixerforge/numerics/tensor.hpp"

namespace mixerforge {

/// Primitive operations understood by both the eager tensor API and the graph
/// evaluator. The forward and backward kernels below are shared by both.
enum class Op : std::uint8_t {
  Leaf,
  Constant,
  MatMul,      // (m,k)x(k,n) -> (m,n); (m,k)x(k) -> (m)
  Outer,       // (m),(n) -> (m,n)
  Mul,         // elementwise
  Add,
  Sub,
  Sigmoid,
  Exp,
  Log,
  Rsqrt,
  RowSoftmax,  // optional causal mask: column j visible from row i iff j <= i + cols - rows
  LogSoftmax,  // row-wise log-softmax
  Sum,         // all elements -> (1)
  Scale,       // constant factor
  ScaleBy,     // (1) x tensor
  Transpose,
  Slice,
  ConcatRows,
  ConcatCols,
  Recurrence,  // q, k, v, a (L,d), e, w (L,1) -> (L,d); see recurrence()
};

struct OpAttrs {
  double factor = 1.0;
  bool causal = false;
  std::size_t r0 = 0, r1 = 0, c0 = 0, c1 = 0;
  bool as_vector = false;
};

constexpr std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::MatMul: return "matmul";
    case Op::Outer: return "outer";
    case Op::Mul: return "mul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Sigmoid: return "sigmoid";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Rsqrt: return "rsqrt";
    case Op::RowSoftmax: return "row_softmax";
    case Op::LogSoftmax: return "log_softmax";
    case Op::Sum: return "sum";
    case Op::Scale: return "scale";
    case Op::ScaleBy: return "scale_by";
    case Op::Transpose: return "transpose";
    case Op::Slice: return "slice";
    case Op::ConcatRows: return "concat_rows";
    case Op::ConcatCols: return "concat_cols";
    case Op::Recurrence: return "recurrence";
  }
  return "?";
}

namespace detail {

[[noreturn]] inline void shape_fail(Op op, const std::vector<const Shape*>& in, std::string_view why) {
  std::string msg(op_name(op));
  msg += ": ";
  msg += why;
  msg += " (inputs";
  for (const auto* s : in) msg += " " + shape_string(*s);
  msg += ")";
  throw ShapeError(msg);
}

inline std::size_t rows_of(const Shape& s) { return s.size() == 2 ? s[0] : 1; }
inline std::size_t cols_of(const Shape& s) { return s.back(); }

}  // namespace detail

/// Output shape of `op` applied to inputs of the given shapes.
inline Shape infer_shape(Op op, const std::vector<const Shape*>& in, const OpAttrs& attrs) {
  using detail::shape_fail;
  auto arity = [&](std::size_t n) {
    if (in.size() != n) shape_fail(op, in, "wrong number of inputs");
  };
  switch (op) {
    case Op::Leaf:
    case Op::Constant:
      shape_fail(op, in, "leaf shapes are not inferred");
    case Op::MatMul: {
      arity(2);
      const Shape& a = *in[0];
      const Shape& b = *in[1];
      if (a.size() != 2) shape_fail(op, in, "left operand must be a matrix");
      if (b[0] != a[1]) shape_fail(op, in, "inner dimensions differ");
      if (b.size() == 1) return {a[0]};
      return {a[0], b[1]};
    }
    case Op::Outer:
      arity(2);
      if (in[0]->size() != 1 || in[1]->size() != 1) shape_fail(op, in, "operands must be vectors");
      return {(*in[0])[0], (*in[1])[0]};
    case Op::Mul:
    case Op::Add:
    case Op::Sub:
      arity(2);
      if (*in[0] != *in[1]) shape_fail(op, in, "elementwise operands must have equal shapes");
      return *in[0];
    case Op::Sigmoid:
    case Op::Exp:
    case Op::Log:
    case Op::Rsqrt:
    case Op::Scale:
      arity(1);
      return *in[0];
    case Op::RowSoftmax:
      arity(1);
      if (attrs.causal && detail::cols_of(*in[0]) < detail::rows_of(*in[0]))
        shape_fail(op, in, "causal mask needs cols >= rows");
      return *in[0];
    case Op::LogSoftmax:
      arity(1);
      return *in[0];
    case Op::Sum:
      arity(1);
      return {1};
    case Op::ScaleBy:
      arity(2);
      if (*in[0] != Shape{1}) shape_fail(op, in, "scale must have shape [1]");
      return *in[1];
    case Op::Transpose:
      arity(1);
      if (in[0]->size() != 2) shape_fail(op, in, "transpose needs a matrix");
      return {(*in[0])[1], (*in[0])[0]};
    case Op::Slice: {
      arity(1);
      const Shape& s = *in[0];
      if (attrs.c0 >= attrs.c1 || attrs.c1 > s.back()) shape_fail(op, in, "column range out of bounds");
      if (s.size() == 1) return {attrs.c1 - attrs.c0};
      if (attrs.r0 >= attrs.r1 || attrs.r1 > s[0]) shape_fail(op, in, "row range out of bounds");
      if (attrs.as_vector) {
        if (attrs.r1 - attrs.r0 != 1) shape_fail(op, in, "vector slice must select one row");
        return {attrs.c1 - attrs.c0};
      }
      return {attrs.r1 - attrs.r0, attrs.c1 - attrs.c0};
    }
    case Op::ConcatRows: {
      if (in.empty()) shape_fail(op, in, "nothing to concatenate");
      const std::size_t cols = in[0]->back();
      std::size_t rows = 0;
      for (const auto* s : in) {
        if (s->back() != cols) shape_fail(op, in, "column counts differ");
        rows += detail::rows_of(*s);
      }
      return {rows, cols};
    }
    case Op::Recurrence: {
      arity(6);
      const Shape& q = *in[0];
      if (q.size() != 2) shape_fail(op, in, "q must be a matrix");
      for (std::size_t j = 1; j < 4; ++j)
        if (*in[j] != q) shape_fail(op, in, "q, k, v and a must share a shape");
      const Shape col{q[0], 1};
      if (*in[4] != col || *in[5] != col) shape_fail(op, in, "e and w must be L x 1");
      return q;
    }
    case Op::ConcatCols: {
      if (in.empty()) shape_fail(op, in, "nothing to concatenate");
      const std::size_t rows = (*in[0])[0];
      std::size_t cols = 0;
      for (const auto* s : in) {
        if (s->size() != 2 || (*s)[0] != rows) shape_fail(op, in, "row counts differ");
        cols += (*s)[1];
      }
      return {rows, cols};
    }
  }
  shape_fail(op, in, "unknown op");
}

template <class T>
struct ConstView {
  const T* data;
  const Shape* shape;
  [[nodiscard]] std::size_t size() const { return shape_numel(*shape); }
};

namespace detail {

/// S_0 = 0; P = S_{t-1} Diag(a_t); S_t = P + (w_t v_t - e_t P k_t) k_t^T;
/// o_t = S_t q_t. States S_0..S_L go to `states` when given.
template <class T>
void recurrence_forward(std::span<const ConstView<T>> in, T* out, std::size_t L, std::size_t d, T* states) {
  const T *q = in[0].data, *k = in[1].data, *v = in[2].data, *a = in[3].data, *e = in[4].data, *w = in[5].data;
  std::vector<T> S(d * d, T{0}), c(d);
  if (states) std::fill(states, states + d * d, T{0});
  for (std::size_t t = 0; t < L; ++t) {
    const T* kt = k + t * d;
    for (std::size_t i = 0; i < d; ++i) {
      T u{0};
      for (std::size_t j = 0; j < d; ++j) {
        S[i * d + j] *= a[t * d + j];
        u += S[i * d + j] * kt[j];
      }
      c[i] = w[t] * v[t * d + i] - e[t] * u;
    }
    for (std::size_t i = 0; i < d; ++i) {
      T o{0};
      for (std::size_t j = 0; j < d; ++j) {
        S[i * d + j] += c[i] * kt[j];
        o += S[i * d + j] * q[t * d + j];
      }
      out[t * d + i] = o;
    }
    if (states) std::copy(S.begin(), S.end(), states + (t + 1) * d * d);
  }
}

template <class T>
void recurrence_backward(std::span<const ConstView<T>> in, const T* grad_out, std::size_t L, std::size_t d,
                         std::span<T* const> grad_in) {
  const T *q = in[0].data, *k = in[1].data, *v = in[2].data, *a = in[3].data, *e = in[4].data, *w = in[5].data;
  std::vector<T> states((L + 1) * d * d), out(L * d);
  recurrence_forward<T>(in, out.data(), L, d, states.data());
  std::vector<T> G(d * d, T{0}), P(d * d), u(d), c(d), dc(d), du(d);
  T *dq = grad_in[0], *dk = grad_in[1], *dv = grad_in[2], *da = grad_in[3], *de = grad_in[4], *dw = grad_in[5];
  for (std::size_t t = L; t-- > 0;) {
    const T* prev = states.data() + t * d * d;
    const T* next = states.data() + (t + 1) * d * d;
    const T *qt = q + t * d, *kt = k + t * d, *vt = v + t * d, *at = a + t * d, *go = grad_out + t * d;
    for (std::size_t i = 0; i < d; ++i) {
      u[i] = T{0};
      for (std::size_t j = 0; j < d; ++j) {
        P[i * d + j] = prev[i * d + j] * at[j];
        u[i] += P[i * d + j] * kt[j];
      }
      c[i] = w[t] * vt[i] - e[t] * u[i];
    }
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) G[i * d + j] += go[i] * qt[j];
    if (dq)
      for (std::size_t j = 0; j < d; ++j)
        for (std::size_t i = 0; i < d; ++i) dq[t * d + j] += next[i * d + j] * go[i];
    T dwt{0}, det{0};
    for (std::size_t i = 0; i < d; ++i) {
      dc[i] = T{0};
      for (std::size_t j = 0; j < d; ++j) dc[i] += G[i * d + j] * kt[j];
      dwt += vt[i] * dc[i];
      det -= u[i] * dc[i];
      du[i] = -e[t] * dc[i];
      if (dv) dv[t * d + i] += w[t] * dc[i];
    }
    if (dw) dw[t] += dwt;
    if (de) de[t] += det;
    for (std::size_t j = 0; j < d; ++j) {
      T dkj{0}, daj{0};
      for (std::size_t i = 0; i < d; ++i) {
        dkj += G[i * d + j] * c[i] + P[i * d + j] * du[i];
        const T dP = G[i * d + j] + du[i] * kt[j];
        daj += prev[i * d + j] * dP;
        G[i * d + j] = dP * at[j];
      }
      if (dk) dk[t * d + j] += dkj;
      if (da) da[t * d + j] += daj;
    }
  }
}

}  // namespace detail

/// Writes `op(inputs)` into `out`, which is sized for the inferred shape.
template <class T>
void forward_kernel(Op op, const OpAttrs& attrs, std::span<const ConstView<T>> in, std::span<T> out,
                    const Shape& out_shape) {
  const std::size_t n = out.size();
  switch (op) {
    case Op::Leaf:
    case Op::Constant:
      return;
    case Op::MatMul: {
      const Shape& as = *in[0].shape;
      const std::size_t m = as[0], k = as[1];
      const std::size_t cols = in[1].shape->size() == 1 ? 1 : (*in[1].shape)[1];
      const T* a = in[0].data;
      const T* b = in[1].data;
      std::fill(out.begin(), out.end(), T{0});
      for (std::size_t i = 0; i < m; ++i) {
        T* row = out.data() + i * cols;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = a[i * k + p];
          const T* brow = b + p * cols;
          for (std::size_t j = 0; j < cols; ++j) row[j] += aip * brow[j];
        }
      }
      return;
    }
    case Op::Outer: {
      const std::size_t m = (*in[0].shape)[0], c = (*in[1].shape)[0];
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = in[0].data[i] * in[1].data[j];
      return;
    }
    case Op::Mul:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[0].data[i] * in[1].data[i];
      return;
    case Op::Add:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[0].data[i] + in[1].data[i];
      return;
    case Op::Sub:
      for (std::size_t i = 0; i < n; ++i) out[i] = in[0].data[i] - in[1].data[i];
      return;
    case Op::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) out[i] = T{1} / (T{1} + std::exp(-in[0].data[i]));
      return;
    case Op::Exp:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[0].data[i]);
      return;
    case Op::Log:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::log(in[0].data[i]);
      return;
    case Op::Rsqrt:
      for (std::size_t i = 0; i < n; ++i) out[i] = T{1} / std::sqrt(in[0].data[i]);
      return;
    case Op::RowSoftmax:
    case Op::LogSoftmax: {
      const std::size_t rows = detail::rows_of(out_shape), cols = detail::cols_of(out_shape);
      const std::size_t offset = cols - rows;
      for (std::size_t r = 0; r < rows; ++r) {
        const T* x = in[0].data + r * cols;
        T* y = out.data() + r * cols;
        const std::size_t visible = (op == Op::RowSoftmax && attrs.causal) ? r + offset + 1 : cols;
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, x[j]);
        T total{0};
        for (std::size_t j = 0; j < visible; ++j) total += std::exp(x[j] - mx);
        if (op == Op::RowSoftmax) {
          for (std::size_t j = 0; j < visible; ++j) y[j] = std::exp(x[j] - mx) / total;
          for (std::size_t j = visible; j < cols; ++j) y[j] = T{0};
        } else {
          const T lse = mx + std::log(total);
          for (std::size_t j = 0; j < cols; ++j) y[j] = x[j] - lse;
        }
      }
      return;
    }
    case Op::Sum: {
      T total{0};
      for (std::size_t i = 0; i < in[0].size(); ++i) total += in[0].data[i];
      out[0] = total;
      return;
    }
    case Op::Scale: {
      const T f = static_cast<T>(attrs.factor);
      for (std::size_t i = 0; i < n; ++i) out[i] = f * in[0].data[i];
      return;
    }
    case Op::ScaleBy: {
      const T f = in[0].data[0];
      for (std::size_t i = 0; i < n; ++i) out[i] = f * in[1].data[i];
      return;
    }
    case Op::Transpose: {
      const std::size_t r = (*in[0].shape)[0], c = (*in[0].shape)[1];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = in[0].data[i * c + j];
      return;
    }
    case Op::Slice: {
      const Shape& s = *in[0].shape;
      const std::size_t width = attrs.c1 - attrs.c0;
      if (s.size() == 1) {
        std::copy_n(in[0].data + attrs.c0, width, out.data());
        return;
      }
      const std::size_t cols = s[1];
      for (std::size_t r = attrs.r0; r < attrs.r1; ++r)
        std::copy_n(in[0].data + r * cols + attrs.c0, width, out.data() + (r - attrs.r0) * width);
      return;
    }
    case Op::ConcatRows: {
      T* dst = out.data();
      for (const auto& v : in) dst = std::copy_n(v.data, v.size(), dst);
      return;
    }
    case Op::Recurrence:
      detail::recurrence_forward<T>(in, out.data(), out_shape[0], out_shape[1], nullptr);
      return;
    case Op::ConcatCols: {
      const std::size_t rows = out_shape[0], total = out_shape[1];
      std::size_t col = 0;
      for (const auto& v : in) {
        const std::size_t w = (*v.shape)[1];
        for (std::size_t r = 0; r < rows; ++r) std::copy_n(v.data + r * w, w, out.data() + r * total + col);
        col += w;
      }
      return;
    }
  }
}

/// Accumulates input gradients given the output value and its gradient.
/// `grad_in[i]` may be null for inputs that need no gradient.
template <class T>
void backward_kernel(Op op, const OpAttrs& attrs, std::span<const ConstView<T>> in, const T* out,
                     const T* grad_out, const Shape& out_shape, std::span<T* const> grad_in) {
  const std::size_t n = shape_numel(out_shape);
  switch (op) {
    case Op::Leaf:
    case Op::Constant:
      return;
    case Op::MatMul: {
      const std::size_t m = (*in[0].shape)[0], k = (*in[0].shape)[1];
      const std::size_t cols = in[1].shape->size() == 1 ? 1 : (*in[1].shape)[1];
      const T* a = in[0].data;
      const T* b = in[1].data;
      if (T* da = grad_in[0]) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            T acc{0};
            const T* g = grad_out + i * cols;
            const T* brow = b + p * cols;
            for (std::size_t j = 0; j < cols; ++j) acc += g[j] * brow[j];
            da[i * k + p] += acc;
          }
      }
      if (T* db = grad_in[1]) {
        for (std::size_t i = 0; i < m; ++i) {
          const T* g = grad_out + i * cols;
          for (std::size_t p = 0; p < k; ++p) {
            const T aip = a[i * k + p];
            T* dbrow = db + p * cols;
            for (std::size_t j = 0; j < cols; ++j) dbrow[j] += aip * g[j];
          }
        }
      }
      return;
    }
    case Op::Outer: {
      const std::size_t m = (*in[0].shape)[0], c = (*in[1].shape)[0];
      if (T* da = grad_in[0])
        for (std::size_t i = 0; i < m; ++i) {
          T acc{0};
          for (std::size_t j = 0; j < c; ++j) acc += grad_out[i * c + j] * in[1].data[j];
          da[i] += acc;
        }
      if (T* db = grad_in[1])
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < c; ++j) db[j] += grad_out[i * c + j] * in[0].data[i];
      return;
    }
    case Op::Mul:
      if (T* da = grad_in[0])
        for (std::size_t i = 0; i < n; ++i) da[i] += grad_out[i] * in[1].data[i];
      if (T* db = grad_in[1])
        for (std::size_t i = 0; i < n; ++i) db[i] += grad_out[i] * in[0].data[i];
      return;
    case Op::Add:
    case Op::Sub: {
      if (T* da = grad_in[0])
        for (std::size_t i = 0; i < n; ++i) da[i] += grad_out[i];
      if (T* db = grad_in[1]) {
        const T sign = op == Op::Add ? T{1} : T{-1};
        for (std::size_t i = 0; i < n; ++i) db[i] += sign * grad_out[i];
      }
      return;
    }
    case Op::Sigmoid:
      if (T* dx = grad_in[0])
        for (std::size_t i = 0; i < n; ++i) dx[i] += grad_out[i] * out[i] * (T{1} - out[i]);
      return;
    case Op::Exp:
      if (T* dx = grad_in[0])
        for (std::size_t i = 0; i < n; ++i) dx[i] += grad_out[i] * out[i];
      return;
    case Op::Log:
      if (T* dx = grad_in[0])
        for (std::size_t i = 0; i < n; ++i) dx[i] += grad_out[i] / in[0].data[i];
      return;
    case Op::Rsqrt:
      if (T* dx = grad_in[0])
        for (std::size_t i = 0; i < n; ++i) dx[i] += grad_out[i] * T(-0.5) * out[i] * out[i] * out[i];
      return;
    case Op::RowSoftmax:
    case Op::LogSoftmax: {
      T* dx = grad_in[0];
      if (!dx) return;
      const std::size_t rows = detail::rows_of(out_shape), cols = detail::cols_of(out_shape);
      for (std::size_t r = 0; r < rows; ++r) {
        const T* y = out + r * cols;
        const T* g = grad_out + r * cols;
        T* d = dx + r * cols;
        if (op == Op::RowSoftmax) {
          T dot{0};
          for (std::size_t j = 0; j < cols; ++j) dot += g[j] * y[j];
          for (std::size_t j = 0; j < cols; ++j) d[j] += y[j] * (g[j] - dot);
        } else {
          T total{0};
          for (std::size_t j = 0; j < cols; ++j) total += g[j];
          for (std::size_t j = 0; j < cols; ++j) d[j] += g[j] - std::exp(y[j]) * total;
        }
      }
      return;
    }
    case Op::Sum:
      if (T* dx = grad_in[0])
        for (std::size_t i = 0; i < in[0].size(); ++i) dx[i] += grad_out[0];
      return;
    case Op::Scale:
      if (T* dx = grad_in[0]) {
        const T f = static_cast<T>(attrs.factor);
        for (std::size_t i = 0; i < n; ++i) dx[i] += f * grad_out[i];
      }
      return;
    case Op::ScaleBy:
      if (T* ds = grad_in[0]) {
        T acc{0};
        for (std::size_t i = 0; i < n; ++i) acc += grad_out[i] * in[1].data[i];
        ds[0] += acc;
      }
      if (T* dx = grad_in[1]) {
        const T f = in[0].data[0];
        for (std::size_t i = 0; i < n; ++i) dx[i] += f * grad_out[i];
      }
      return;
    case Op::Transpose:
      if (T* dx = grad_in[0]) {
        const std::size_t r = (*in[0].shape)[0], c = (*in[0].shape)[1];
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j) dx[i * c + j] += grad_out[j * r + i];
      }
      return;
    case Op::Slice:
      if (T* dx = grad_in[0]) {
        const Shape& s = *in[0].shape;
        const std::size_t width = attrs.c1 - attrs.c0;
        if (s.size() == 1) {
          for (std::size_t j = 0; j < width; ++j) dx[attrs.c0 + j] += grad_out[j];
          return;
        }
        const std::size_t cols = s[1];
        for (std::size_t r = attrs.r0; r < attrs.r1; ++r)
          for (std::size_t j = 0; j < width; ++j)
            dx[r * cols + attrs.c0 + j] += grad_out[(r - attrs.r0) * width + j];
      }
      return;
    case Op::ConcatRows: {
      const T* src = grad_out;
      for (std::size_t i = 0; i < in.size(); ++i) {
        const std::size_t len = in[i].size();
        if (T* dx = grad_in[i])
          for (std::size_t j = 0; j < len; ++j) dx[j] += src[j];
        src += len;
      }
      return;
    }
    case Op::Recurrence:
      detail::recurrence_backward<T>(in, grad_out, out_shape[0], out_shape[1], grad_in);
      return;
    case Op::ConcatCols: {
      const std::size_t rows = out_shape[0], total = out_shape[1];
      std::size_t col = 0;
      for (std::size_t i = 0; i < in.size(); ++i) {
        const std::size_t w = (*in[i].shape)[1];
        if (T* dx = grad_in[i])
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < w; ++j) dx[r * w + j] += grad_out[r * total + col + j];
        col += w;
      }
      return;
    }
  }
}

// ---------------------------------------------------------------------------
// Eager tensor operations.
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
Tensor<T> apply_eager(Op op, const OpAttrs& attrs, std::initializer_list<const Tensor<T>*> inputs) {
  std::vector<const Shape*> shapes;
  std::vector<ConstView<T>> views;
  shapes.reserve(inputs.size());
  views.reserve(inputs.size());
  for (const auto* t : inputs) {
    if (t->empty()) throw ShapeError(std::string(op_name(op)) + ": empty operand");
    shapes.push_back(&t->shape());
    views.push_back({t->data().data(), &t->shape()});
  }
  Shape shape = infer_shape(op, shapes, attrs);
  Tensor<T> out(shape);
  forward_kernel<T>(op, attrs, views, out.data(), out.shape());
  if (!out.all_finite()) throw NumericError(std::string(op_name(op)) + ": non-finite result");
  return out;
}

template <class T>
Tensor<T> apply_eager_list(Op op, std::span<const Tensor<T>> inputs) {
  std::vector<const Shape*> shapes;
  std::vector<ConstView<T>> views;
  for (const auto& t : inputs) {
    shapes.push_back(&t.shape());
    views.push_back({t.data().data(), &t.shape()});
  }
  Shape shape = infer_shape(op, shapes, {});
  Tensor<T> out(shape);
  forward_kernel<T>(op, {}, views, out.data(), out.shape());
  return out;
}

}  // namespace detail

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::apply_eager(Op::MatMul, {}, {&a, &b});
}
template <class T>
Tensor<T> outer(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::apply_eager(Op::Outer, {}, {&a, &b});
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::apply_eager(Op::Mul, {}, {&a, &b});
}
template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::apply_eager(Op::Add, {}, {&a, &b});
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::apply_eager(Op::Sub, {}, {&a, &b});
}
template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return detail::apply_eager(Op::Sigmoid, {}, {&a});
}
template <class T>
Tensor<T> exp(const Tensor<T>& a) {
  return detail::apply_eager(Op::Exp, {}, {&a});
}
template <class T>
Tensor<T> log(const Tensor<T>& a) {
  return detail::apply_eager(Op::Log, {}, {&a});
}
template <class T>
Tensor<T> rsqrt(const Tensor<T>& a) {
  return detail::apply_eager(Op::Rsqrt, {}, {&a});
}
template <class T>
Tensor<T> row_softmax(const Tensor<T>& a, bool causal = false) {
  OpAttrs attrs;
  attrs.causal = causal;
  return detail::apply_eager(Op::RowSoftmax, attrs, {&a});
}
template <class T>
Tensor<T> log_softmax(const Tensor<T>& a) {
  return detail::apply_eager(Op::LogSoftmax, {}, {&a});
}
template <class T>
Tensor<T> sum(const Tensor<T>& a) {
  return detail::apply_eager(Op::Sum, {}, {&a});
}
template <class T>
Tensor<T> scale(const Tensor<T>& a, double factor) {
  OpAttrs attrs;
  attrs.factor = factor;
  return detail::apply_eager(Op::Scale, attrs, {&a});
}
template <class T>
Tensor<T> scale_by(const Tensor<T>& s, const Tensor<T>& a) {
  return detail::apply_eager(Op::ScaleBy, {}, {&s, &a});
}
template <class T>
Tensor<T> transpose(const Tensor<T>& a) {
  return detail::apply_eager(Op::Transpose, {}, {&a});
}
template <class T>
Tensor<T> slice(const Tensor<T>& a, std::size_t r0, std::size_t r1, std::size_t c0, std::size_t c1) {
  OpAttrs attrs;
  attrs.r0 = r0, attrs.r1 = r1, attrs.c0 = c0, attrs.c1 = c1;
  return detail::apply_eager(Op::Slice, attrs, {&a});
}
/// Columns [c0, c1) of row r as a vector.
template <class T>
Tensor<T> row(const Tensor<T>& a, std::size_t r, std::size_t c0, std::size_t c1) {
  OpAttrs attrs;
  attrs.r0 = r, attrs.r1 = r + 1, attrs.c0 = c0, attrs.c1 = c1, attrs.as_vector = true;
  return detail::apply_eager(Op::Slice, attrs, {&a});
}
/// Elements [c0, c1) of a vector.
template <class T>
Tensor<T> segment(const Tensor<T>& a, std::size_t c0, std::size_t c1) {
  OpAttrs attrs;
  attrs.c0 = c0, attrs.c1 = c1;
  return detail::apply_eager(Op::Slice, attrs, {&a});
}
template <class T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  return detail::apply_eager_list(Op::ConcatRows, parts);
}
template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
  return concat_rows(std::span<const Tensor<T>>(parts));
}
template <class T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts) {
  return detail::apply_eager_list(Op::ConcatCols, parts);
}
template <class T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  return concat_cols(std::span<const Tensor<T>>(parts));
}

/// Fused linear recurrence over one head, rows are time steps:
///   P_t = S_{t-1} Diag(a_t),  S_t = P_t + (w_t v_t - e_t P_t k_t) k_t^T,  o_t = S_t q_t
/// with S_0 = 0. e = 0, w = 1 gives the decay family; e = w = beta with
/// unit keys gives the delta rule.
template <class T>
Tensor<T> recurrence(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, const Tensor<T>& a,
                     const Tensor<T>& e, const Tensor<T>& w) {
  return detail::apply_eager(Op::Recurrence, {}, {&q, &k, &v, &a, &e, &w});
}

/// Constant of the given shape in the value domain of `like`.
template <class T>
Tensor<T> fill_like(const Tensor<T>& /*like*/, Shape shape, double value) {
  return Tensor<T>(std::move(shape), static_cast<T>(value));
}
template <class T>
Tensor<T> constant_like(const Tensor<T>& /*like*/, const Tensor<double>& value) {
  return value.template cast<T>();
}

}  // namespace mixerforge

#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mtot/tensor.hpp"

namespace mtot {

/// Selects `A` or `A^T` as the operand of a mode product.
enum class Op { kNone, kTranspose };

namespace detail {

inline void check_partition(Index order, std::span<const Index> rows, std::span<const Index> cols) {
  std::vector<int> seen(static_cast<std::size_t>(order), 0);
  auto mark = [&](Index m) {
    if (m < 0 || m >= order) throw ShapeError("mode index " + std::to_string(m) + " out of range");
    if (seen[static_cast<std::size_t>(m)]++) throw ShapeError("mode " + std::to_string(m) + " listed twice");
  };
  for (Index m : rows) mark(m);
  for (Index m : cols) mark(m);
  if (static_cast<Index>(rows.size() + cols.size()) != order)
    throw ShapeError("row and column modes must cover every mode exactly once");
}

// Walks the tensor buffer in storage order while tracking the (row, col)
// position of each element in the matricization where, inside each group,
// the first-listed mode varies fastest.
template <typename Fn>
void for_each_matricized(const Shape& shape, std::span<const Index> rows, std::span<const Index> cols, Fn&& fn) {
  const auto n = shape.size();
  std::vector<Index> stride_r(n, 0), stride_c(n, 0);
  Index p = 1;
  for (Index m : rows) {
    stride_r[static_cast<std::size_t>(m)] = p;
    p *= shape[static_cast<std::size_t>(m)];
  }
  Index q = 1;
  for (Index m : cols) {
    stride_c[static_cast<std::size_t>(m)] = q;
    q *= shape[static_cast<std::size_t>(m)];
  }
  std::vector<Index> idx(n, 0);
  Index r = 0, c = 0;
  const Index total = shape_size(shape);
  for (Index off = 0; off < total; ++off) {
    fn(off, r, c);
    for (std::size_t k = n; k-- > 0;) {
      if (++idx[k] < shape[k]) {
        r += stride_r[k];
        c += stride_c[k];
        break;
      }
      r -= stride_r[k] * (shape[k] - 1);
      c -= stride_c[k] * (shape[k] - 1);
      idx[k] = 0;
    }
  }
}

inline std::vector<Index> complement_modes(Index order, Index mode) {
  std::vector<Index> rest;
  rest.reserve(static_cast<std::size_t>(order));
  for (Index k = 0; k < order; ++k)
    if (k != mode) rest.push_back(k);
  return rest;
}

}  // namespace detail

/// Matricization with `rows` and `cols` modes; either side may be empty
/// (its extent is then 1). Within each side, earlier-listed modes vary fastest.
template <typename Scalar>
MatrixX<Scalar> matricize(const Tensor<Scalar>& t, std::span<const Index> rows, std::span<const Index> cols) {
  detail::check_partition(t.order(), rows, cols);
  Index p = 1, q = 1;
  for (Index m : rows) p *= t.extent(m);
  for (Index m : cols) q *= t.extent(m);
  MatrixX<Scalar> out(p, q);
  const Scalar* src = t.data();
  detail::for_each_matricized(t.shape(), rows, cols, [&](Index off, Index r, Index c) { out(r, c) = src[off]; });
  return out;
}

/// Inverse of matricize() for a tensor of the given shape.
template <typename Derived>
Tensor<typename Derived::Scalar> tensorize(const Eigen::MatrixBase<Derived>& m, std::span<const Index> rows,
                                           std::span<const Index> cols, const Shape& shape) {
  using Scalar = typename Derived::Scalar;
  detail::check_partition(static_cast<Index>(shape.size()), rows, cols);
  Index p = 1, q = 1;
  for (Index r : rows) p *= shape[static_cast<std::size_t>(r)];
  for (Index c : cols) q *= shape[static_cast<std::size_t>(c)];
  if (m.rows() != p || m.cols() != q)
    throw ShapeError("matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                     std::to_string(p) + "x" + std::to_string(q) + " for shape " + shape_string(shape));
  Tensor<Scalar> t(shape);
  Scalar* dst = t.data();
  detail::for_each_matricized(shape, rows, cols, [&](Index off, Index r, Index c) { dst[off] = m(r, c); });
  return t;
}

/// Mode-`mode` unfolding: rows index `mode`, columns run over the remaining
/// modes with lower-numbered modes varying fastest.
template <typename Scalar>
MatrixX<Scalar> unfold(const Tensor<Scalar>& t, Index mode) {
  if (mode < 0 || mode >= t.order()) throw ShapeError("unfold: mode " + std::to_string(mode) + " out of range");
  const Index row_mode[1] = {mode};
  const auto rest = detail::complement_modes(t.order(), mode);
  return matricize(t, row_mode, rest);
}

template <typename Derived>
Tensor<typename Derived::Scalar> fold(const Eigen::MatrixBase<Derived>& m, Index mode, const Shape& shape) {
  const auto order = static_cast<Index>(shape.size());
  if (mode < 0 || mode >= order) throw ShapeError("fold: mode " + std::to_string(mode) + " out of range");
  const Index row_mode[1] = {mode};
  const auto rest = detail::complement_modes(order, mode);
  return tensorize(m, row_mode, rest, shape);
}

/// General matricization; both mode groups must be non-empty.
template <typename Scalar>
MatrixX<Scalar> unfold_general(const Tensor<Scalar>& t, std::span<const Index> rows, std::span<const Index> cols) {
  if (rows.empty() || cols.empty()) throw ShapeError("unfold_general: both mode groups must be non-empty");
  return matricize(t, rows, cols);
}

template <typename Derived>
Tensor<typename Derived::Scalar> fold_general(const Eigen::MatrixBase<Derived>& m, std::span<const Index> rows,
                                              std::span<const Index> cols, const Shape& shape) {
  if (rows.empty() || cols.empty()) throw ShapeError("fold_general: both mode groups must be non-empty");
  return tensorize(m, rows, cols, shape);
}

/// t x_mode op(a). With Op::kNone `a` has cols == extent(mode); with
/// Op::kTranspose `a` has rows == extent(mode) and a^T is applied.
template <typename Scalar>
Tensor<Scalar> mode_product(const Tensor<Scalar>& t, const MatrixX<Scalar>& a, Index mode, Op op = Op::kNone) {
  if (mode < 0 || mode >= t.order())
    throw ShapeError("mode_product: mode " + std::to_string(mode) + " out of range");
  const Index in_extent = t.extent(mode);
  const Index a_in = op == Op::kNone ? a.cols() : a.rows();
  const Index a_out = op == Op::kNone ? a.rows() : a.cols();
  if (a_in != in_extent)
    throw ShapeError("mode_product: matrix inner extent " + std::to_string(a_in) + " does not match mode " +
                     std::to_string(mode) + " extent " + std::to_string(in_extent));

  Shape out_shape = t.shape();
  out_shape[static_cast<std::size_t>(mode)] = a_out;
  Tensor<Scalar> out(out_shape);

  Index left = 1, right = 1;
  for (Index k = 0; k < mode; ++k) left *= t.extent(k);
  for (Index k = mode + 1; k < t.order(); ++k) right *= t.extent(k);

  using RowMap = Eigen::Map<RowMajorMatrixX<Scalar>>;
  using ConstRowMap = Eigen::Map<const RowMajorMatrixX<Scalar>>;
  if (right == 1) {
    // Storage is a (left x extent) row-major matrix; multiply from the right.
    ConstRowMap in(t.data(), left, in_extent);
    RowMap dst(out.data(), left, a_out);
    if (op == Op::kNone)
      dst.noalias() = in * a.transpose();
    else
      dst.noalias() = in * a;
    return out;
  }
  for (Index l = 0; l < left; ++l) {
    ConstRowMap in(t.data() + l * in_extent * right, in_extent, right);
    RowMap dst(out.data() + l * a_out * right, a_out, right);
    if (op == Op::kNone)
      dst.noalias() = a * in;
    else
      dst.noalias() = a.transpose() * in;
  }
  return out;
}

/// Chained mode products core x_{modes[0]} factors[0] x ... (modes distinct).
template <typename Scalar>
Tensor<Scalar> multi_mode_product(const Tensor<Scalar>& core, std::span<const MatrixX<Scalar>> factors,
                                  std::span<const Index> modes, Op op = Op::kNone) {
  if (factors.size() != modes.size()) throw ShapeError("multi_mode_product: factor and mode counts differ");
  std::vector<Index> sorted(modes.begin(), modes.end());
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ShapeError("multi_mode_product: duplicate mode index");
  Tensor<Scalar> out = core;
  for (std::size_t k = 0; k < factors.size(); ++k) out = mode_product(out, factors[k], modes[k], op);
  return out;
}

template <typename DerivedA, typename DerivedB>
MatrixX<typename DerivedA::Scalar> kronecker(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  MatrixX<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// x * b: sums over the first `count` modes of b, which must equal shape(x).
template <typename Scalar>
Tensor<Scalar> contract(const Tensor<Scalar>& x, const Tensor<Scalar>& b, Index count) {
  if (count != x.order() || b.order() <= count)
    throw ShapeError("contract: need order(x) == count < order(b)");
  for (Index k = 0; k < count; ++k)
    if (x.extent(k) != b.extent(k))
      throw ShapeError("contract: leading modes of b " + shape_string(b.shape()) + " do not match x " +
                       shape_string(x.shape()));
  Shape out_shape(b.shape().begin() + count, b.shape().end());
  const Index rest = shape_size(out_shape);
  Eigen::Map<const RowMajorMatrixX<Scalar>> bm(b.data(), x.size(), rest);
  VectorX<Scalar> out = bm.transpose() * x.values();
  return Tensor<Scalar>(std::move(out_shape), std::move(out));
}

/// Sample-wise contraction: x has shape [M, P...], b has shape [P..., Q...];
/// returns the [M, Q...] tensor whose m-th slice is x_m * b.
template <typename Scalar>
Tensor<Scalar> batch_contract(const Tensor<Scalar>& x, const Tensor<Scalar>& b) {
  const Index count = x.order() - 1;
  if (count < 1 || b.order() <= count) throw ShapeError("batch_contract: incompatible orders");
  for (Index k = 0; k < count; ++k)
    if (x.extent(k + 1) != b.extent(k)) throw ShapeError("batch_contract: extent mismatch");
  const Index m = x.extent(0);
  const Index inner = x.size() / m;
  Shape out_shape{m};
  out_shape.insert(out_shape.end(), b.shape().begin() + count, b.shape().end());
  Tensor<Scalar> out(out_shape);
  const Index rest = out.size() / m;
  Eigen::Map<const RowMajorMatrixX<Scalar>> xm(x.data(), m, inner);
  Eigen::Map<const RowMajorMatrixX<Scalar>> bm(b.data(), inner, rest);
  Eigen::Map<RowMajorMatrixX<Scalar>> om(out.data(), m, rest);
  om.noalias() = xm * bm;
  return out;
}

template <typename Scalar>
Scalar frobenius_norm(const Tensor<Scalar>& t) {
  return t.values().norm();
}

template <typename Scalar>
Scalar squared_norm(const Tensor<Scalar>& t) {
  return t.values().squaredNorm();
}

template <typename Scalar>
Scalar inner_product(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw ShapeError("inner_product: shape mismatch");
  return a.values().dot(b.values());
}

}  // namespace mtot

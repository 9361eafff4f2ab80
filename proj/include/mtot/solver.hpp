#pragma once

// Multiple tensor-on-tensor regression.
//
// The model is  Y = sum_j X_j * B_j + E  where the sample mode comes first in
// Y (M x Q_1 x ... x Q_d) and in every X_j (M x P_j1 x ... x P_jl). Each
// coefficient tensor is expanded as
//
//   B_j = C_j x_1 U_j1 ... x_l U_jl x_{l+1} V_1 ... x_{l+d} V_d
//
// with input bases U_ji fixed from a Tucker decomposition of X_j, and output
// bases V_i (column-orthonormal) shared across inputs. fit() alternates exact
// least-squares updates of the reshaped cores with orthogonal Procrustes
// updates of the output bases until the loss settles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "mtot/decomposition.hpp"
#include "mtot/multilinear.hpp"
#include "mtot/rng.hpp"
#include "mtot/tensor.hpp"

namespace mtot {

/// Copies the given samples (leading-mode indices) of `t`, in order.
template <typename Scalar>
Tensor<Scalar> select_samples(const Tensor<Scalar>& t, std::span<const Index> rows) {
  Shape shape = t.shape();
  const Index stride = t.size() / shape[0];
  shape[0] = static_cast<Index>(rows.size());
  if (shape[0] == 0) throw ShapeError("select_samples: empty selection");
  Tensor<Scalar> out(shape);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= t.extent(0)) throw ShapeError("select_samples: sample index out of range");
    out.values().segment(static_cast<Index>(k) * stride, stride) = t.values().segment(rows[k] * stride, stride);
  }
  return out;
}

template <typename Scalar = double>
struct Dataset {
  Tensor<Scalar> y;
  std::vector<Tensor<Scalar>> xs;

  Index samples() const { return y.extent(0); }
  Index inputs() const { return static_cast<Index>(xs.size()); }
  Index output_order() const { return y.order() - 1; }

  void validate() const {
    if (xs.empty()) throw ShapeError("dataset needs at least one input");
    if (y.order() < 2) throw ShapeError("response must have a sample mode and at least one more mode");
    for (const auto& x : xs) {
      if (x.order() < 2) throw ShapeError("every input must have a sample mode and at least one more mode");
      if (x.extent(0) != y.extent(0))
        throw ShapeError("input sample count " + std::to_string(x.extent(0)) + " differs from response " +
                         std::to_string(y.extent(0)));
    }
  }

  Dataset subset(std::span<const Index> rows) const {
    Dataset out;
    out.y = select_samples(y, rows);
    for (const auto& x : xs) out.xs.push_back(select_samples(x, rows));
    return out;
  }
};

enum class InputBasis { kTucker, kIdentity };
enum class OutputInit { kHosvd, kRandom };

struct FitConfig {
  std::vector<Index> input_ranks;  // one uniform rank per input
  Index output_rank = 1;           // uniform rank over output modes
  double tol = 1e-6;
  int max_iter = 100;
  std::uint64_t seed = 0;
  InputBasis input_basis = InputBasis::kTucker;
  OutputInit output_init = OutputInit::kHosvd;
};

template <typename Scalar = double>
struct MtotModel {
  std::vector<std::vector<MatrixX<Scalar>>> u;  // u[j][i]: P_ji x rank
  std::vector<MatrixX<Scalar>> v;               // v[i]: Q_i x rank
  std::vector<Tensor<Scalar>> cores;            // reshaped cores [prod input ranks, output ranks...]
  std::vector<double> loss_trace;               // w_0, w_1, ...
  std::vector<Shape> input_shapes;              // non-sample extents per input
  Shape output_shape;                           // non-sample extents of the response
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;

  Index inputs() const { return static_cast<Index>(u.size()); }
  Index output_order() const { return static_cast<Index>(v.size()); }
};

/// Full (untruncated) bases from which a fit takes its leading columns.
template <typename Scalar = double>
struct BasisCache {
  std::vector<std::vector<MatrixX<Scalar>>> inputs;  // per input, per non-sample mode
  std::vector<MatrixX<Scalar>> outputs;              // per output mode (HOSVD of the response)
};

template <typename Scalar>
BasisCache<Scalar> compute_basis_cache(const Dataset<Scalar>& data, InputBasis basis) {
  data.validate();
  BasisCache<Scalar> cache;
  for (const auto& x : data.xs) {
    std::vector<MatrixX<Scalar>> modes;
    for (Index k = 1; k < x.order(); ++k) {
      if (basis == InputBasis::kIdentity)
        modes.push_back(MatrixX<Scalar>::Identity(x.extent(k), x.extent(k)));
      else
        modes.push_back(left_singular_basis(unfold(x, k)).vectors);
    }
    cache.inputs.push_back(std::move(modes));
  }
  for (Index k = 1; k < data.y.order(); ++k) cache.outputs.push_back(left_singular_basis(unfold(data.y, k)).vectors);
  return cache;
}

template <typename Scalar>
void validate_config(const Dataset<Scalar>& data, const FitConfig& cfg) {
  data.validate();
  if (static_cast<Index>(cfg.input_ranks.size()) != data.inputs())
    throw ConfigError("expected " + std::to_string(data.inputs()) + " input ranks, got " +
                      std::to_string(cfg.input_ranks.size()));
  for (std::size_t j = 0; j < cfg.input_ranks.size(); ++j) {
    const Index r = cfg.input_ranks[j];
    const auto& x = data.xs[j];
    for (Index k = 1; k < x.order(); ++k)
      if (r < 1 || r > x.extent(k))
        throw ConfigError("input " + std::to_string(j) + " rank " + std::to_string(r) + " infeasible for extent " +
                          std::to_string(x.extent(k)));
  }
  for (Index k = 1; k < data.y.order(); ++k)
    if (cfg.output_rank < 1 || cfg.output_rank > data.y.extent(k))
      throw ConfigError("output rank " + std::to_string(cfg.output_rank) + " infeasible for extent " +
                        std::to_string(data.y.extent(k)));
  if (!(cfg.tol > 0)) throw ConfigError("tol must be positive");
  if (cfg.max_iter < 1) throw ConfigError("max_iter must be at least 1");
}

/// Number of free parameters in a fitted model with the given ranks.
template <typename Scalar>
Index parameter_count(const Dataset<Scalar>& data, std::span<const Index> input_ranks, Index output_rank) {
  Index out_core = 1, out_basis = 0;
  for (Index k = 1; k < data.y.order(); ++k) {
    out_core *= output_rank;
    out_basis += data.y.extent(k) * output_rank;
  }
  Index total = out_basis;
  for (std::size_t j = 0; j < data.xs.size(); ++j) {
    Index in = 1;
    for (Index k = 1; k < data.xs[j].order(); ++k) in *= input_ranks[j];
    total += in * out_core;
  }
  return total;
}

/// Z_j = X_j(1) (U_jl kron ... kron U_j1), formed with mode products.
template <typename Scalar>
MatrixX<Scalar> input_projection(const Tensor<Scalar>& x, std::span<const MatrixX<Scalar>> u) {
  if (static_cast<Index>(u.size()) != x.order() - 1)
    throw ShapeError("input_projection: need one factor per non-sample mode");
  std::vector<Index> modes;
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k].rows() != x.extent(static_cast<Index>(k) + 1)) throw ShapeError("input_projection: factor rows mismatch");
    modes.push_back(static_cast<Index>(k) + 1);
  }
  return unfold(multi_mode_product(x, u, modes, Op::kTranspose), 0);
}

/// Least-squares core given everything else fixed:
/// r x_1 pinv(z) x_2 V_1^T ... x_{d+1} V_d^T (V_i column-orthonormal).
template <typename Scalar>
Tensor<Scalar> update_core(const Tensor<Scalar>& residual, const MatrixX<Scalar>& z,
                           std::span<const MatrixX<Scalar>> v) {
  if (residual.order() != static_cast<Index>(v.size()) + 1) throw ShapeError("update_core: residual order mismatch");
  if (z.rows() != residual.extent(0)) throw ShapeError("update_core: z rows must equal the sample count");
  Tensor<Scalar> out = mode_product(residual, pinv(z), 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].rows() != residual.extent(static_cast<Index>(i) + 1)) throw ShapeError("update_core: basis rows mismatch");
    out = mode_product(out, v[i], static_cast<Index>(i) + 1, Op::kTranspose);
  }
  return out;
}

template <typename Scalar>
struct BasisUpdate {
  MatrixX<Scalar> v;
  bool stagnated = false;
};

/// Orthogonal Procrustes: column-orthonormal V (shape of `previous`) that
/// maximizes trace(V^T t). A zero `t` keeps `previous` and flags stagnation.
template <typename Scalar>
BasisUpdate<Scalar> procrustes(const MatrixX<Scalar>& t, const MatrixX<Scalar>& previous) {
  if (t.rows() != previous.rows() || t.cols() != previous.cols()) throw ShapeError("procrustes: shape mismatch");
  if (t.norm() == Scalar(0)) return {previous, true};
  const auto svd = thin_svd(t);
  return {svd.u * svd.v.transpose(), false};
}

/// Procrustes step for t = lt * rt^T when the inner dimension n is smaller
/// than t's column count. Reduces to thin QRs of both factors and an n x n
/// SVD; the columns of the result outside the image of t are completed from
/// the orthogonal complements of the two QR bases.
template <typename Scalar>
BasisUpdate<Scalar> procrustes_factored(const MatrixX<Scalar>& lt, const MatrixX<Scalar>& rt,
                                        const MatrixX<Scalar>& previous) {
  const Index n = lt.cols();
  if (rt.cols() != n || lt.rows() != previous.rows() || rt.rows() != previous.cols() || n >= rt.rows())
    throw ShapeError("procrustes_factored: shape mismatch");
  if (lt.norm() == Scalar(0) || rt.norm() == Scalar(0)) return {previous, true};
  const Eigen::HouseholderQR<MatrixX<Scalar>> ql(lt), qr(rt);
  const MatrixX<Scalar> q1 = ql.householderQ();
  const MatrixX<Scalar> q2 = qr.householderQ();
  const MatrixX<Scalar> r1 = ql.matrixQR().topRows(n).template triangularView<Eigen::Upper>();
  const MatrixX<Scalar> r2 = qr.matrixQR().topRows(n).template triangularView<Eigen::Upper>();
  const auto svd = thin_svd<Scalar>(r1 * r2.transpose());
  const Index extra = rt.rows() - n;
  MatrixX<Scalar> v = (q1.leftCols(n) * svd.u) * (q2.leftCols(n) * svd.v).transpose();
  v.noalias() += q1.middleCols(n, extra) * q2.rightCols(extra).transpose();
  return {std::move(v), false};
}

/// Prediction of one input's component: core x_1 z x_2 V_1 ... x_{d+1} V_d.
template <typename Scalar>
Tensor<Scalar> component(const Tensor<Scalar>& core, const MatrixX<Scalar>& z, std::span<const MatrixX<Scalar>> v) {
  Tensor<Scalar> out = mode_product(core, z, 0);
  for (std::size_t i = 0; i < v.size(); ++i) out = mode_product(out, v[i], static_cast<Index>(i) + 1);
  return out;
}

/// Output-basis update for output mode `mode` (0-based over the d output
/// modes). Builds S = sum_j C_j(i) (V_d kron .. V_{i+1} kron V_{i-1} .. kron Z_j)^T
/// through mode products and solves the Procrustes problem for Y_(i) S^T.
template <typename Scalar>
BasisUpdate<Scalar> update_basis(const Tensor<Scalar>& y, std::span<const Tensor<Scalar>> cores,
                                 std::span<const MatrixX<Scalar>> zs, std::span<const MatrixX<Scalar>> v, Index mode) {
  const Index d = static_cast<Index>(v.size());
  if (mode < 0 || mode >= d) throw ShapeError("update_basis: output mode out of range");
  if (cores.size() != zs.size() || cores.empty()) throw ShapeError("update_basis: need one z per core");
  std::optional<Tensor<Scalar>> partial;
  for (std::size_t j = 0; j < cores.size(); ++j) {
    Tensor<Scalar> part = mode_product(cores[j], zs[j], 0);
    for (Index i = 0; i < d; ++i)
      if (i != mode) part = mode_product(part, v[static_cast<std::size_t>(i)], i + 1);
    if (partial)
      *partial += part;
    else
      partial = std::move(part);
  }
  const MatrixX<Scalar> s = unfold(*partial, mode + 1);
  const MatrixX<Scalar> t = unfold(y, mode + 1) * s.transpose();
  return procrustes(t, v[static_cast<std::size_t>(mode)]);
}

/// Reshaped core C_j with modes (input ranks..., output ranks...).
template <typename Scalar>
Tensor<Scalar> expand_core(const MtotModel<Scalar>& model, Index j) {
  const auto& core = model.cores.at(static_cast<std::size_t>(j));
  const auto& u = model.u[static_cast<std::size_t>(j)];
  Shape shape;
  for (const auto& f : u) shape.push_back(f.cols());
  for (Index k = 1; k < core.order(); ++k) shape.push_back(core.extent(k));
  std::vector<Index> rows, cols;
  for (std::size_t k = 0; k < u.size(); ++k) rows.push_back(static_cast<Index>(k));
  for (std::size_t k = u.size(); k < shape.size(); ++k) cols.push_back(static_cast<Index>(k));
  const Index core_row[1] = {0};
  std::vector<Index> core_cols;
  for (Index k = 1; k < core.order(); ++k) core_cols.push_back(k);
  return tensorize(matricize(core, core_row, core_cols), rows, cols, shape);
}

/// B_j = C_j x U_j1 ... x U_jl x V_1 ... x V_d, shape [P_j..., Q...].
template <typename Scalar>
Tensor<Scalar> assemble_coefficients(const MtotModel<Scalar>& model, Index j) {
  Tensor<Scalar> b = expand_core(model, j);
  const auto& u = model.u[static_cast<std::size_t>(j)];
  const Index l = static_cast<Index>(u.size());
  for (Index k = 0; k < l; ++k) b = mode_product(b, u[static_cast<std::size_t>(k)], k);
  for (Index i = 0; i < model.output_order(); ++i) b = mode_product(b, model.v[static_cast<std::size_t>(i)], l + i);
  return b;
}

template <typename Scalar>
void check_inputs(const MtotModel<Scalar>& model, std::span<const Tensor<Scalar>> xs) {
  if (static_cast<Index>(xs.size()) != model.inputs()) throw ShapeError("predict: wrong number of inputs");
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (xs[j].order() < 2 || trailing_shape(xs[j].shape()) != model.input_shapes[j])
      throw ShapeError("predict: input " + std::to_string(j) + " has shape " + shape_string(xs[j].shape()) +
                       ", expected [M," + shape_string(model.input_shapes[j]).substr(1));
    if (xs[j].extent(0) != xs[0].extent(0)) throw ShapeError("predict: inputs disagree on sample count");
  }
}

/// Y_hat = sum_j X_j * B_j, evaluated through the input projections so the
/// coefficient tensors are never materialized.
template <typename Scalar>
Tensor<Scalar> predict(const MtotModel<Scalar>& model, std::span<const Tensor<Scalar>> xs) {
  check_inputs(model, xs);
  Shape shape{xs[0].extent(0)};
  shape.insert(shape.end(), model.output_shape.begin(), model.output_shape.end());
  Tensor<Scalar> out(shape);
  for (std::size_t j = 0; j < xs.size(); ++j)
    out += component<Scalar>(model.cores[j], input_projection<Scalar>(xs[j], model.u[j]), model.v);
  return out;
}

/// Same prediction through explicitly assembled coefficient tensors.
template <typename Scalar>
Tensor<Scalar> predict_assembled(const MtotModel<Scalar>& model, std::span<const Tensor<Scalar>> xs) {
  check_inputs(model, xs);
  Shape shape{xs[0].extent(0)};
  shape.insert(shape.end(), model.output_shape.begin(), model.output_shape.end());
  Tensor<Scalar> out(shape);
  for (std::size_t j = 0; j < xs.size(); ++j) out += batch_contract(xs[j], assemble_coefficients(model, static_cast<Index>(j)));
  return out;
}

/// ||Y_(1) - sum_j X_j(1) B_j||_F^2 for explicit coefficient tensors.
template <typename Scalar>
Scalar loss(const Dataset<Scalar>& data, std::span<const Tensor<Scalar>> coefficients) {
  data.validate();
  if (static_cast<Index>(coefficients.size()) != data.inputs()) throw ShapeError("loss: one coefficient per input");
  Tensor<Scalar> r = data.y;
  for (std::size_t j = 0; j < coefficients.size(); ++j) r -= batch_contract(data.xs[j], coefficients[j]);
  return squared_norm(r);
}

template <typename Scalar>
Scalar loss(const Dataset<Scalar>& data, const MtotModel<Scalar>& model) {
  return squared_norm(Tensor<Scalar>(data.y - predict<Scalar>(model, data.xs)));
}

/// R_j = Y - sum_{k != j} X_k * B_k.
template <typename Scalar>
Tensor<Scalar> partial_residual(const Dataset<Scalar>& data, const MtotModel<Scalar>& model, Index j) {
  Tensor<Scalar> r = data.y;
  for (Index k = 0; k < model.inputs(); ++k) {
    if (k == j) continue;
    const auto ks = static_cast<std::size_t>(k);
    r -= component<Scalar>(model.cores[ks], input_projection<Scalar>(data.xs[ks], model.u[ks]), model.v);
  }
  return r;
}

namespace detail {

template <typename Scalar>
MatrixX<Scalar> random_orthonormal(Index rows, Index cols, Rng& rng) {
  MatrixX<Scalar> g(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) g(r, c) = static_cast<Scalar>(rng.normal());
  Eigen::HouseholderQR<MatrixX<Scalar>> qr(g);
  MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(rows, cols);
  fix_signs(q);
  return q;
}

// Input side of the alternating scheme after replacing each Z_j by an
// orthonormal basis A_j of its column space: Z_j C_j = A_j K_j with
// K_j = S_j W_j^T C_j. All sweeps then run on tensors with leading extent
// rank(Z_j) instead of the sample count.
template <typename Scalar>
struct ReducedInput {
  MatrixX<Scalar> basis;      // A_j, M x r_j
  MatrixX<Scalar> back;       // W_j S_j^{-1}, maps K_j back to C_j
  Tensor<Scalar> projected;   // Y x_1 A_j^T, [r_j, Q...]
};

template <typename Scalar>
ReducedInput<Scalar> reduce_input(const MatrixX<Scalar>& z, const Tensor<Scalar>& y) {
  ReducedInput<Scalar> out;
  const auto svd = thin_svd(z);
  const Scalar smax = svd.singular_values.size() ? svd.singular_values(0) : Scalar(0);
  const Scalar cut = rank_cutoff(smax, z.rows(), z.cols());
  Index r = 0;
  while (r < svd.singular_values.size() && smax > 0 && svd.singular_values(r) > cut) ++r;
  out.basis = svd.u.leftCols(r);
  out.back = svd.v.leftCols(r) * svd.singular_values.head(r).cwiseInverse().asDiagonal();
  if (r > 0) {
    out.projected = mode_product(y, out.basis, 0, Op::kTranspose);
  } else {
    Shape shape = y.shape();
    shape[0] = 1;  // placeholder, never read when r == 0
    out.projected = Tensor<Scalar>(shape);
  }
  return out;
}

}  // namespace detail

/// Alternating block-coordinate estimation. `cache`, when given, must come
/// from compute_basis_cache() on the same dataset and input-basis choice.
template <typename Scalar>
MtotModel<Scalar> fit(const Dataset<Scalar>& data, const FitConfig& cfg, const BasisCache<Scalar>* cache = nullptr) {
  validate_config(data, cfg);
  if (!data.y.all_finite()) throw NumericalError("fit: response has non-finite values");
  for (const auto& x : data.xs)
    if (!x.all_finite()) throw NumericalError("fit: input has non-finite values");

  std::optional<BasisCache<Scalar>> local;
  if (cache == nullptr) {
    local = compute_basis_cache(data, cfg.input_basis);
    cache = &*local;
  }

  const std::size_t p = data.xs.size();
  const Index d = data.output_order();
  const Index q_rank = cfg.output_rank;

  MtotModel<Scalar> model;
  model.output_shape = trailing_shape(data.y.shape());
  for (std::size_t j = 0; j < p; ++j) {
    model.input_shapes.push_back(trailing_shape(data.xs[j].shape()));
    std::vector<MatrixX<Scalar>> u;
    for (const auto& full : cache->inputs[j]) u.push_back(full.leftCols(cfg.input_ranks[j]));
    model.u.push_back(std::move(u));
  }
  Rng rng(derive_seed(cfg.seed, 0x5eed));
  for (Index i = 0; i < d; ++i) {
    const auto is = static_cast<std::size_t>(i);
    if (cfg.output_init == OutputInit::kRandom)
      model.v.push_back(detail::random_orthonormal<Scalar>(data.y.extent(i + 1), q_rank, rng));
    else
      model.v.push_back(cache->outputs[is].leftCols(q_rank));
  }

  std::vector<detail::ReducedInput<Scalar>> red;
  std::vector<Tensor<Scalar>> kcore;
  for (std::size_t j = 0; j < p; ++j) {
    red.push_back(detail::reduce_input<Scalar>(input_projection<Scalar>(data.xs[j], model.u[j]), data.y));
    Shape shape{std::max<Index>(red[j].basis.cols(), 1)};
    for (Index i = 0; i < d; ++i) shape.push_back(q_rank);
    kcore.emplace_back(shape);
  }
  std::vector<std::vector<MatrixX<Scalar>>> cross(p, std::vector<MatrixX<Scalar>>(p));
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < p; ++k)
      if (j != k) cross[j][k] = red[j].basis.transpose() * red[k].basis;

  std::vector<Index> out_modes;
  for (Index i = 0; i < d; ++i) out_modes.push_back(i + 1);
  auto project_outputs = [&](std::size_t j) {
    return multi_mode_product<Scalar>(red[j].projected, model.v, out_modes, Op::kTranspose);
  };
  auto active = [&](std::size_t j) { return red[j].basis.cols() > 0; };

  const Scalar y2 = squared_norm(data.y);
  model.loss_trace.push_back(static_cast<double>(y2));
  const double w0 = model.loss_trace.front();
  const double threshold = cfg.tol * std::max(w0, 1.0);

  std::vector<Tensor<Scalar>> proj(p);
  for (std::size_t j = 0; j < p; ++j)
    if (active(j)) proj[j] = project_outputs(j);

  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    for (std::size_t j = 0; j < p; ++j) {
      if (!active(j)) continue;
      Tensor<Scalar> target = proj[j];
      for (std::size_t k = 0; k < p; ++k)
        if (k != j && active(k)) target -= mode_product(kcore[k], cross[j][k], 0);
      kcore[j] = std::move(target);
    }
    for (Index i = 0; i < d; ++i) {
      const auto is = static_cast<std::size_t>(i);
      // T = sum_j unfold(part_j) unfold(K_j)^T = L R^T with the factors stacked side by side.
      std::vector<MatrixX<Scalar>> lefts, rights;
      Index inner = 0;
      for (std::size_t j = 0; j < p; ++j) {
        if (!active(j)) continue;
        Tensor<Scalar> part = red[j].projected;
        for (Index k = 0; k < d; ++k)
          if (k != i) part = mode_product(part, model.v[static_cast<std::size_t>(k)], k + 1, Op::kTranspose);
        lefts.push_back(unfold(part, i + 1));
        rights.push_back(unfold(kcore[j], i + 1));
        inner += lefts.back().cols();
      }
      BasisUpdate<Scalar> upd;
      if (inner > 0 && inner < q_rank) {
        MatrixX<Scalar> lt(data.y.extent(i + 1), inner), rt(q_rank, inner);
        Index col = 0;
        for (std::size_t k = 0; k < lefts.size(); ++k) {
          lt.middleCols(col, lefts[k].cols()) = lefts[k];
          rt.middleCols(col, rights[k].cols()) = rights[k];
          col += lefts[k].cols();
        }
        upd = procrustes_factored<Scalar>(lt, rt, model.v[is]);
      } else {
        MatrixX<Scalar> t = MatrixX<Scalar>::Zero(data.y.extent(i + 1), q_rank);
        for (std::size_t k = 0; k < lefts.size(); ++k) t.noalias() += lefts[k] * rights[k].transpose();
        upd = procrustes<Scalar>(t, model.v[is]);
      }
      model.stagnated = model.stagnated || upd.stagnated;
      model.v[is] = std::move(upd.v);
    }

    Scalar fit_term = 0, model_term = 0;
    for (std::size_t j = 0; j < p; ++j) {
      if (!active(j)) continue;
      proj[j] = project_outputs(j);
      fit_term += inner_product(proj[j], kcore[j]);
      model_term += squared_norm(kcore[j]);
      for (std::size_t k = 0; k < p; ++k)
        if (k != j && active(k)) model_term += inner_product(mode_product(kcore[k], cross[j][k], 0), kcore[j]);
    }
    const double w = std::max(0.0, static_cast<double>(y2 - 2 * fit_term + model_term));
    const double prev = model.loss_trace.back();
    model.loss_trace.push_back(w);
    model.iterations = iter;
    if (std::abs(w - prev) <= threshold) {
      model.converged = true;
      break;
    }
  }

  for (std::size_t j = 0; j < p; ++j) {
    Index n = 1;
    for (const auto& f : model.u[j]) n *= f.cols();
    Shape shape{n};
    for (Index i = 0; i < d; ++i) shape.push_back(q_rank);
    if (active(j))
      model.cores.push_back(mode_product(kcore[j], red[j].back, 0));
    else
      model.cores.emplace_back(shape);
  }
  // The running trace uses an expanded-norm identity; the last entry is
  // recomputed from the explicit residual so it stays accurate near zero.
  model.loss_trace.back() = static_cast<double>(loss(data, model));
  return model;
}

extern template struct Dataset<double>;
extern template MtotModel<double> fit<double>(const Dataset<double>&, const FitConfig&, const BasisCache<double>*);
extern template Tensor<double> predict<double>(const MtotModel<double>&, std::span<const Tensor<double>>);
extern template BasisCache<double> compute_basis_cache<double>(const Dataset<double>&, InputBasis);

}  // namespace mtot

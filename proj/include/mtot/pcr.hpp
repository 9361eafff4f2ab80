#pragma once

// Principal component regression baseline: inputs are flattened per sample
// and concatenated, inputs and response are reduced to their leading
// principal components, and response scores are regressed on input scores.

#include <cstdint>
#include <span>
#include <vector>

#include "mtot/decomposition.hpp"
#include "mtot/solver.hpp"
#include "mtot/tuning.hpp"

namespace mtot {

template <typename Scalar = double>
struct PcrModel {
  VectorX<Scalar> x_mean;
  MatrixX<Scalar> x_loadings;  // concatenated input width x G_x
  VectorX<Scalar> y_mean;
  MatrixX<Scalar> y_loadings;  // response width x G_y
  MatrixX<Scalar> coef;        // (G_x + 1) x G_y, intercept row first
  double v = 1.0;
  std::vector<Shape> input_shapes;
  Shape output_shape;

  Index gx() const { return x_loadings.cols(); }
  Index gy() const { return y_loadings.cols(); }
};

/// The candidate retained-variance fractions searched by pcr_cv().
inline std::vector<double> default_variance_grid() { return {0.85, 0.90, 0.95, 0.99, 0.995}; }

/// Per-sample flattening of each input (storage order), concatenated.
template <typename Scalar>
MatrixX<Scalar> concat_inputs(std::span<const Tensor<Scalar>> xs) {
  if (xs.empty()) throw ShapeError("concat_inputs: no inputs");
  const Index m = xs[0].extent(0);
  Index width = 0;
  for (const auto& x : xs) {
    if (x.extent(0) != m) throw ShapeError("concat_inputs: sample counts differ");
    width += x.size() / m;
  }
  MatrixX<Scalar> out(m, width);
  Index col = 0;
  for (const auto& x : xs) {
    const Index w = x.size() / m;
    out.middleCols(col, w) = Eigen::Map<const RowMajorMatrixX<Scalar>>(x.data(), m, w);
    col += w;
  }
  return out;
}

/// Smallest component count whose squared singular values reach fraction
/// `v` of the total, capped by the numerical rank and at least one.
template <typename Scalar>
Index components_for_variance(const VectorX<Scalar>& s, Index rows, Index cols, double v) {
  if (s.size() == 0) return 1;
  const Scalar total = s.squaredNorm();
  if (total <= Scalar(0)) return 1;
  const Scalar cut = rank_cutoff(s(0), rows, cols);
  const Index rank = std::max<Index>(1, static_cast<Index>((s.array() > cut).count()));
  Scalar acc = 0;
  for (Index g = 0; g < s.size(); ++g) {
    acc += s(g) * s(g);
    if (acc / total >= static_cast<Scalar>(v) - Scalar(1e-12)) return std::min(g + 1, rank);
  }
  return rank;
}

namespace detail {

template <typename Scalar>
void principal_axes(const MatrixX<Scalar>& centered, double v, MatrixX<Scalar>& loadings) {
  Eigen::BDCSVD<MatrixX<Scalar>> svd(centered, Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("pcr: SVD did not converge");
  const Index g = components_for_variance<Scalar>(svd.singularValues(), centered.rows(), centered.cols(), v);
  MatrixX<Scalar> axes = svd.matrixV();
  fix_signs(axes);
  loadings = axes.leftCols(g);
}

}  // namespace detail

template <typename Scalar>
PcrModel<Scalar> pcr_fit(const Dataset<Scalar>& data, double v) {
  data.validate();
  if (!(v > 0.0 && v <= 1.0)) throw ConfigError("pcr: variance fraction must lie in (0, 1]");
  const Index m = data.samples();
  if (m < 2) throw ConfigError("pcr: need at least two samples");

  PcrModel<Scalar> model;
  model.v = v;
  for (const auto& x : data.xs) model.input_shapes.push_back(trailing_shape(x.shape()));
  model.output_shape = trailing_shape(data.y.shape());

  const MatrixX<Scalar> x = concat_inputs<Scalar>(data.xs);
  model.x_mean = x.colwise().mean().transpose();
  const MatrixX<Scalar> xc = x.rowwise() - model.x_mean.transpose();
  detail::principal_axes(xc, v, model.x_loadings);

  const Index qw = data.y.size() / m;
  const Eigen::Map<const RowMajorMatrixX<Scalar>> y(data.y.data(), m, qw);
  model.y_mean = y.colwise().mean().transpose();
  const MatrixX<Scalar> yc = y.rowwise() - model.y_mean.transpose();
  detail::principal_axes(yc, v, model.y_loadings);

  MatrixX<Scalar> design(m, model.gx() + 1);
  design.col(0).setOnes();
  design.rightCols(model.gx()) = xc * model.x_loadings;
  const MatrixX<Scalar> scores = yc * model.y_loadings;
  model.coef = pinv(design) * scores;
  return model;
}

template <typename Scalar>
Tensor<Scalar> pcr_predict(const PcrModel<Scalar>& model, std::span<const Tensor<Scalar>> xs) {
  if (xs.size() != model.input_shapes.size()) throw ShapeError("pcr_predict: wrong number of inputs");
  for (std::size_t j = 0; j < xs.size(); ++j)
    if (xs[j].order() < 2 || trailing_shape(xs[j].shape()) != model.input_shapes[j])
      throw ShapeError("pcr_predict: input " + std::to_string(j) + " shape mismatch");
  const MatrixX<Scalar> x = concat_inputs<Scalar>(xs);
  const Index m = x.rows();
  MatrixX<Scalar> design(m, model.gx() + 1);
  design.col(0).setOnes();
  design.rightCols(model.gx()) = (x.rowwise() - model.x_mean.transpose()) * model.x_loadings;
  const RowMajorMatrixX<Scalar> y =
      ((design * model.coef) * model.y_loadings.transpose()).rowwise() + model.y_mean.transpose();
  Shape shape{m};
  shape.insert(shape.end(), model.output_shape.begin(), model.output_shape.end());
  return Tensor<Scalar>(shape, Eigen::Map<const VectorX<Scalar>>(y.data(), y.size()));
}

template <typename Scalar = double>
struct PcrCvResult {
  double v = 0;
  PcrModel<Scalar> model;
  std::vector<double> grid;
  std::vector<double> cv_mse;  // held-out mean squared error per grid value
};

/// Chooses v from `grid` by k-fold held-out MSE (ties to the smaller v) and
/// refits on all samples.
template <typename Scalar>
PcrCvResult<Scalar> pcr_cv(const Dataset<Scalar>& data, int folds, std::uint64_t seed,
                           std::vector<double> grid = default_variance_grid()) {
  data.validate();
  if (grid.empty()) throw ConfigError("pcr_cv: empty variance grid");
  if (folds < 2 || data.samples() < folds) throw ConfigError("pcr_cv: invalid fold count");
  std::sort(grid.begin(), grid.end());
  const auto assignment = fold_assignment(data.samples(), folds, seed);
  std::vector<double> sse(grid.size(), 0.0);
  double entries = 0;
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train, test;
    for (Index m = 0; m < data.samples(); ++m) (assignment[static_cast<std::size_t>(m)] == f ? test : train).push_back(m);
    const auto tr = data.subset(train);
    const auto te = data.subset(test);
    entries += static_cast<double>(te.y.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto model = pcr_fit(tr, grid[g]);
      sse[g] += static_cast<double>(squared_norm(Tensor<Scalar>(te.y - pcr_predict<Scalar>(model, te.xs))));
    }
  }
  PcrCvResult<Scalar> out;
  out.grid = grid;
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    out.cv_mse.push_back(sse[g] / entries);
    if (out.cv_mse[g] < out.cv_mse[best]) best = g;
  }
  out.v = grid[best];
  out.model = pcr_fit(data, out.v);
  return out;
}

extern template PcrModel<double> pcr_fit<double>(const Dataset<double>&, double);
extern template Tensor<double> pcr_predict<double>(const PcrModel<double>&, std::span<const Tensor<double>>);
extern template PcrCvResult<double> pcr_cv<double>(const Dataset<double>&, int, std::uint64_t, std::vector<double>);

}  // namespace mtot

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mtot/multilinear.hpp"
#include "mtot/tensor.hpp"

namespace mtot {

/// Flips each column of `u` (and the matching column of `v`, if given) so the
/// column's largest-magnitude entry is positive. Ties go to the first entry.
template <typename Scalar>
void fix_signs(MatrixX<Scalar>& u, MatrixX<Scalar>* v = nullptr) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index arg = 0;
    Scalar best = -1;
    for (Index i = 0; i < u.rows(); ++i) {
      const Scalar m = std::abs(u(i, j));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    if (u.rows() > 0 && u(arg, j) < 0) {
      u.col(j) = -u.col(j);
      if (v != nullptr && j < v->cols()) v->col(j) = -v->col(j);
    }
  }
}

/// Default singular-value cutoff: sigma_max * max(rows, cols) * epsilon.
template <typename Scalar>
Scalar rank_cutoff(Scalar sigma_max, Index rows, Index cols) {
  return sigma_max * static_cast<Scalar>(std::max(rows, cols)) * std::numeric_limits<Scalar>::epsilon();
}

template <typename Scalar>
struct SvdResult {
  MatrixX<Scalar> u;
  VectorX<Scalar> singular_values;
  MatrixX<Scalar> v;
};

/// Thin SVD with the deterministic sign convention applied to U (V follows).
template <typename Scalar>
SvdResult<Scalar> thin_svd(const MatrixX<Scalar>& a) {
  if (!a.allFinite()) throw NumericalError("thin_svd: non-finite input");
  Eigen::BDCSVD<MatrixX<Scalar>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("thin_svd: SVD did not converge");
  SvdResult<Scalar> out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  fix_signs(out.u, &out.v);
  return out;
}

template <typename Scalar>
struct LeftBasis {
  MatrixX<Scalar> vectors;          // rows x rows, orthogonal, ordered by decreasing singular value
  VectorX<Scalar> singular_values;  // length min(rows, cols)
};

/// Complete set of left singular vectors of `a`. Wide, large matrices go
/// through the eigendecomposition of a * a^T.
template <typename Scalar>
LeftBasis<Scalar> left_singular_basis(const MatrixX<Scalar>& a) {
  if (!a.allFinite()) throw NumericalError("left_singular_basis: non-finite input");
  const Index rows = a.rows(), cols = a.cols();
  LeftBasis<Scalar> out;
  if (cols > 2 * rows && rows * cols > 250000) {
    MatrixX<Scalar> gram = MatrixX<Scalar>::Zero(rows, rows);
    gram.template selfadjointView<Eigen::Lower>().rankUpdate(a);
    gram = gram.template selfadjointView<Eigen::Lower>();
    Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("left_singular_basis: eigensolver failed");
    out.vectors = eig.eigenvectors().rowwise().reverse();
    out.singular_values = eig.eigenvalues().reverse().cwiseMax(Scalar(0)).cwiseSqrt();
  } else {
    Eigen::BDCSVD<MatrixX<Scalar>> svd(a, Eigen::ComputeFullU);
    if (svd.info() != Eigen::Success) throw NumericalError("left_singular_basis: SVD did not converge");
    out.vectors = svd.matrixU();
    out.singular_values = svd.singularValues();
  }
  fix_signs(out.vectors);
  return out;
}

template <typename Scalar>
Index numerical_rank(const MatrixX<Scalar>& m) {
  if (m.size() == 0) return 0;
  if (!m.allFinite()) throw NumericalError("numerical_rank: non-finite input");
  Eigen::BDCSVD<MatrixX<Scalar>> svd(m);
  if (svd.info() != Eigen::Success) throw NumericalError("numerical_rank: SVD did not converge");
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == Scalar(0)) return 0;
  const Scalar cut = rank_cutoff(s(0), m.rows(), m.cols());
  return static_cast<Index>((s.array() > cut).count());
}

/// Moore-Penrose pseudoinverse via SVD with the default cutoff.
template <typename Scalar>
MatrixX<Scalar> pinv(const MatrixX<Scalar>& a) {
  if (a.size() == 0) return MatrixX<Scalar>::Zero(a.cols(), a.rows());
  const auto svd = thin_svd(a);
  const Scalar smax = svd.singular_values.size() ? svd.singular_values(0) : Scalar(0);
  const Scalar cut = rank_cutoff(smax, a.rows(), a.cols());
  VectorX<Scalar> inv = VectorX<Scalar>::Zero(svd.singular_values.size());
  for (Index k = 0; k < inv.size(); ++k)
    if (svd.singular_values(k) > cut && smax > 0) inv(k) = Scalar(1) / svd.singular_values(k);
  return svd.v * inv.asDiagonal() * svd.u.transpose();
}

template <typename Scalar>
struct TuckerResult {
  Tensor<Scalar> core;
  std::vector<MatrixX<Scalar>> factors;
};

/// Truncated HOSVD: factor k holds the leading ranks[k] left singular
/// vectors of the mode-k unfolding; core = t x_1 U_1^T ... x_n U_n^T.
template <typename Scalar>
TuckerResult<Scalar> tucker(const Tensor<Scalar>& t, std::span<const Index> ranks) {
  if (static_cast<Index>(ranks.size()) != t.order()) throw ConfigError("tucker: one rank per mode required");
  TuckerResult<Scalar> out;
  std::vector<Index> modes;
  for (Index k = 0; k < t.order(); ++k) {
    const Index r = ranks[static_cast<std::size_t>(k)];
    if (r < 1 || r > t.extent(k))
      throw ConfigError("tucker: rank " + std::to_string(r) + " out of range for mode " + std::to_string(k) +
                        " of extent " + std::to_string(t.extent(k)));
    const auto basis = left_singular_basis(unfold(t, k));
    out.factors.push_back(basis.vectors.leftCols(r));
    modes.push_back(k);
  }
  out.core = multi_mode_product<Scalar>(t, out.factors, modes, Op::kTranspose);
  return out;
}

/// core x_1 U_1 ... x_n U_n.
template <typename Scalar>
Tensor<Scalar> tucker_reconstruct(const TuckerResult<Scalar>& tk) {
  std::vector<Index> modes(tk.factors.size());
  for (std::size_t k = 0; k < modes.size(); ++k) modes[k] = static_cast<Index>(k);
  return multi_mode_product<Scalar>(tk.core, tk.factors, modes);
}

}  // namespace mtot

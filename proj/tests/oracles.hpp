#pragma once

// Independent reference implementations used by the tests. Everything here is
// written with plain index loops so it shares no code path with the library.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mtot/tensor.hpp"

namespace oracle {

using mtot::Index;
using mtot::Matrixd;
using mtot::Shape;
using mtot::Tensord;
using mtot::Vectord;

struct Random {
  explicit Random(std::uint64_t seed) : engine(seed) {}

  double normal() { return gauss(engine); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine); }
  Index integer(Index lo, Index hi) { return std::uniform_int_distribution<Index>(lo, hi)(engine); }

  Matrixd matrix(Index rows, Index cols) {
    Matrixd m(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  Tensord tensor(const Shape& shape) {
    Tensord t(shape);
    for (Index k = 0; k < t.size(); ++k) t.values()(k) = normal();
    return t;
  }

  /// Haar-distributed column-orthonormal matrix (QR of a Gaussian matrix with sign fix on R's diagonal).
  Matrixd orthonormal(Index rows, Index cols) {
    const Matrixd g = matrix(rows, cols);
    Eigen::HouseholderQR<Matrixd> qr(g);
    Matrixd q = qr.householderQ() * Matrixd::Identity(rows, cols);
    const Matrixd r = qr.matrixQR();
    for (Index c = 0; c < cols; ++c)
      if (r(c, c) < 0) q.col(c) *= -1.0;
    return q;
  }

  std::mt19937_64 engine;
  std::normal_distribution<double> gauss{0.0, 1.0};
};

/// Advances a multi-index with the last position fastest; false after the last one.
inline bool next_index(std::vector<Index>& idx, const Shape& shape) {
  for (Index k = static_cast<Index>(shape.size()) - 1; k >= 0; --k) {
    if (++idx[static_cast<std::size_t>(k)] < shape[static_cast<std::size_t>(k)]) return true;
    idx[static_cast<std::size_t>(k)] = 0;
  }
  return false;
}

/// Buffer offset of a multi-index, last mode fastest.
inline Index offset(const std::vector<Index>& idx, const Shape& shape) {
  Index off = 0;
  for (std::size_t k = 0; k < shape.size(); ++k) off = off * shape[k] + idx[k];
  return off;
}

/// Combined index over a group of modes, earlier-listed modes fastest.
inline Index group_index(const std::vector<Index>& idx, const Shape& shape, const std::vector<Index>& modes) {
  Index out = 0, stride = 1;
  for (Index m : modes) {
    out += idx[static_cast<std::size_t>(m)] * stride;
    stride *= shape[static_cast<std::size_t>(m)];
  }
  return out;
}

inline Index group_size(const Shape& shape, const std::vector<Index>& modes) {
  Index n = 1;
  for (Index m : modes) n *= shape[static_cast<std::size_t>(m)];
  return n;
}

inline Matrixd matricize(const Tensord& t, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Matrixd out(group_size(t.shape(), rows), group_size(t.shape(), cols));
  std::vector<Index> idx(t.shape().size(), 0);
  do {
    out(group_index(idx, t.shape(), rows), group_index(idx, t.shape(), cols)) = t.values()(offset(idx, t.shape()));
  } while (next_index(idx, t.shape()));
  return out;
}

inline Matrixd unfold(const Tensord& t, Index mode) {
  std::vector<Index> rest;
  for (Index k = 0; k < t.order(); ++k)
    if (k != mode) rest.push_back(k);
  return matricize(t, {mode}, rest);
}

/// vec() with the first mode fastest.
inline Vectord vec(const Tensord& t) {
  std::vector<Index> all;
  for (Index k = 0; k < t.order(); ++k) all.push_back(k);
  return matricize(t, all, {}).col(0);
}

inline Tensord unvec(const Vectord& v, const Shape& shape) {
  Tensord t(shape);
  std::vector<Index> all;
  for (Index k = 0; k < static_cast<Index>(shape.size()); ++k) all.push_back(k);
  std::vector<Index> idx(shape.size(), 0);
  do {
    t.values()(offset(idx, shape)) = v(group_index(idx, shape, all));
  } while (next_index(idx, shape));
  return t;
}

inline Matrixd kronecker(const Matrixd& a, const Matrixd& b) {
  Matrixd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index k = 0; k < b.rows(); ++k)
        for (Index l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

/// factors.back() kron ... kron factors.front().
inline Matrixd kronecker_chain(const std::vector<Matrixd>& factors) {
  Matrixd out = Matrixd::Ones(1, 1);
  for (const auto& f : factors) out = kronecker(f, out);
  return out;
}

/// t x_mode a by explicit summation.
inline Tensord mode_product(const Tensord& t, const Matrixd& a, Index mode) {
  Shape shape = t.shape();
  shape[static_cast<std::size_t>(mode)] = a.rows();
  Tensord out(shape);
  std::vector<Index> idx(shape.size(), 0);
  do {
    double s = 0;
    std::vector<Index> src = idx;
    for (Index k = 0; k < a.cols(); ++k) {
      src[static_cast<std::size_t>(mode)] = k;
      s += a(idx[static_cast<std::size_t>(mode)], k) * t.values()(offset(src, t.shape()));
    }
    out.values()(offset(idx, shape)) = s;
  } while (next_index(idx, shape));
  return out;
}

/// Least-squares core of y ~ c x_1 z x_2 v_1 ... x_{d+1} v_d from the
/// explicit normal equations of the vectorized problem
/// vec(y) = (v_d kron ... kron v_1 kron z) vec(c).
inline Tensord normal_equation_core(const Tensord& y, const Matrixd& z, const std::vector<Matrixd>& v) {
  std::vector<Matrixd> factors{z};
  factors.insert(factors.end(), v.begin(), v.end());
  const Matrixd a = kronecker_chain(factors);
  const Matrixd ata = a.transpose() * a;
  const Vectord c = ata.fullPivLu().solve(a.transpose() * vec(y));
  Shape shape{z.cols()};
  for (const auto& f : v) shape.push_back(f.cols());
  return unvec(c, shape);
}

/// sum over all entries of (y - sum_j x_j * b_j)^2, one scalar at a time.
inline double loss(const Tensord& y, const std::vector<Tensord>& xs, const std::vector<Tensord>& bs) {
  const Index m = y.extent(0);
  const Index qsize = y.size() / m;
  double total = 0;
  for (Index s = 0; s < m; ++s)
    for (Index q = 0; q < qsize; ++q) {
      double r = y.values()(s * qsize + q);
      for (std::size_t j = 0; j < xs.size(); ++j) {
        const Index psize = xs[j].size() / m;
        for (Index p = 0; p < psize; ++p) r -= xs[j].values()(s * psize + p) * bs[j].values()(p * qsize + q);
      }
      total += r * r;
    }
  return total;
}

inline double relative_error(const Matrixd& a, const Matrixd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0 ? 0.0 : (a - b).norm() / scale;
}

inline double relative_error(const Tensord& a, const Tensord& b) {
  return relative_error(Matrixd(a.values()), Matrixd(b.values()));
}

}  // namespace oracle

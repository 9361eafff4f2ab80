#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>

#include "mtot/simgen.hpp"

namespace mtot {

namespace {

using Poly = Eigen::Matrix<double, 6, 1>;

// Basis of the second-order correction model: 1, x, y, x^2, y^2, xy, in
// coordinates scaled by the wafer radius to keep the normal equations well
// conditioned.
Poly monomials(double x, double y) {
  Poly p;
  p << 1.0, x, y, x * x, y * y, x * y;
  return p;
}

}  // namespace

Vectord central_difference(const Vectord& f, double h) {
  const Index n = f.size();
  if (n < 3) throw ShapeError("central_difference: need at least three nodes");
  Vectord g(n);
  for (Index i = 1; i + 1 < n; ++i) g(i) = (f(i + 1) - f(i - 1)) / (2.0 * h);
  g(0) = (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
  g(n - 1) = (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / (2.0 * h);
  return g;
}

WaferGrid::WaferGrid(double radius, Index cartesian, Index radial, Index angular)
    : radius_(radius), h_(2.0 * radius / static_cast<double>(cartesian - 1)), radial_(radial), angular_(angular) {
  if (cartesian < 3 || radial < 1 || angular < 1) throw ConfigError("wafer grid too small");
  nodes_.resize(cartesian);
  for (Index a = 0; a < cartesian; ++a) nodes_(a) = -radius + static_cast<double>(a) * h_;

  // Per column (equivalently per row, by symmetry of the square grid): the
  // in-disc node count and sums of the other coordinate to powers 1 and 2.
  disc_sums_ = Matrixd::Zero(cartesian, 3);
  gram_.setZero();
  const double r2 = radius * radius;
  for (Index a = 0; a < cartesian; ++a)
    for (Index b = 0; b < cartesian; ++b) {
      if (nodes_(a) * nodes_(a) + nodes_(b) * nodes_(b) > r2) continue;
      const double x = nodes_(a) / radius, y = nodes_(b) / radius;
      disc_sums_(a, 0) += 1.0;
      disc_sums_(a, 1) += y;
      disc_sums_(a, 2) += y * y;
      const Poly p = monomials(x, y);
      gram_ += p * p.transpose();
    }
}

std::pair<double, double> WaferGrid::polar_point(Index i, Index j) const {
  const double r = radius_ * static_cast<double>(i) / static_cast<double>(radial_);
  const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(angular_);
  return {r * std::cos(theta), r * std::sin(theta)};
}

Vectord WaferGrid::along_axis(const WaferSurface& s, int axis) const {
  Vectord f = Vectord::Zero(nodes_.size());
  for (std::size_t k = 0; k < s.heights.size(); ++k) {
    const double h = s.heights[k], lambda = s.wavelengths[k];
    for (Index a = 0; a < nodes_.size(); ++a) {
      const double arg = 2.0 * std::numbers::pi * nodes_(a) / lambda;
      f(a) += 0.5 * h * (1.0 + (axis == 0 ? std::sin(arg) : std::cos(arg)));
    }
  }
  return f;
}

Matrixd WaferGrid::sample(const Vectord& fx, const Vectord& fy, const Poly& poly) const {
  const Index n = nodes_.size();
  auto node = [&](Index a, Index b) {
    double v = poly.dot(monomials(nodes_(a) / radius_, nodes_(b) / radius_));
    if (fx.size()) v += fx(a);
    if (fy.size()) v += fy(b);
    return v;
  };
  auto locate = [&](double c, Index& cell, double& frac) {
    const double pos = (c + radius_) / h_;
    cell = std::clamp<Index>(static_cast<Index>(std::floor(pos)), 0, n - 2);
    frac = pos - static_cast<double>(cell);
  };
  Matrixd out(radial_, angular_);
  for (Index i = 0; i < radial_; ++i)
    for (Index j = 0; j < angular_; ++j) {
      const auto [x, y] = polar_point(i, j);
      if (x * x + y * y > radius_ * radius_) {
        out(i, j) = 0.0;
        continue;
      }
      Index a, b;
      double tx, ty;
      locate(x, a, tx);
      locate(y, b, ty);
      out(i, j) = (1 - tx) * (1 - ty) * node(a, b) + tx * (1 - ty) * node(a + 1, b) + (1 - tx) * ty * node(a, b + 1) +
                  tx * ty * node(a + 1, b + 1);
    }
  return out;
}

Matrixd WaferGrid::height(const WaferSurface& s) const {
  Poly bow = Poly::Zero();
  bow(3) = 0.5 * s.bow;
  bow(4) = s.bow;
  return sample(along_axis(s, 0), along_axis(s, 1), bow);
}

namespace {

// Negative finite-difference gradient of w along `axis`. Terms of w that are
// constant along the axis drop out, leaving a function of that coordinate.
Vectord negative_gradient(const WaferSurface& s, int axis, const Vectord& nodes, const Vectord& wave, double h,
                          double radius) {
  const double c = (axis == 0 ? 0.5 : 1.0) * s.bow / (radius * radius);
  Vectord f = wave;
  for (Index a = 0; a < nodes.size(); ++a) f(a) += c * nodes(a) * nodes(a);
  return -central_difference(f, h);
}

}  // namespace

Poly WaferGrid::correction(const Vectord& g, int axis) const {
  // Normal equations over in-disc nodes for a field that depends on one
  // coordinate only, accumulated per column (or row).
  Poly rhs = Poly::Zero();
  for (Index a = 0; a < nodes_.size(); ++a) {
    const double c = nodes_(a) / radius_, s0 = disc_sums_(a, 0), s1 = disc_sums_(a, 1), s2 = disc_sums_(a, 2);
    Poly m;
    if (axis == 0)
      m << s0, c * s0, s1, c * c * s0, s2, c * s1;
    else
      m << s0, s1, c * s0, s2, c * c * s0, c * s1;
    rhs += g(a) * m;
  }
  return gram_.ldlt().solve(rhs);
}

Matrixd WaferGrid::distortion(const WaferSurface& s, int axis) const {
  const Vectord g = negative_gradient(s, axis, nodes_, along_axis(s, axis), h_, radius_);
  return axis == 0 ? sample(g, Vectord(), Poly::Zero()) : sample(Vectord(), g, Poly::Zero());
}

Matrixd WaferGrid::residual_distortion(const WaferSurface& s, int axis) const {
  const Vectord g = negative_gradient(s, axis, nodes_, along_axis(s, axis), h_, radius_);
  const Poly k = correction(g, axis);
  return axis == 0 ? sample(g, Vectord(), -k) : sample(Vectord(), g, -k);
}

}  // namespace mtot

#pragma once

// Seeded data generators for the simulation studies and the wafer overlay
// surrogate. Every generator is a pure function of its SimSpec.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtot/rng.hpp"
#include "mtot/solver.hpp"
#include "mtot/tensor.hpp"

namespace mtot {

enum class SimKind { kCurveOnCurve, kWaveform, kCone, kJump, kWafer };

std::string to_string(SimKind kind);
/// Accepts curve_on_curve, waveform, cone, jump, wafer.
SimKind parse_sim_kind(std::string_view name);

struct SimSpec {
  SimKind kind = SimKind::kWaveform;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> noise_seed;  // defaults to seed
  double sigma = 0.0;
  Index m_train = 0;
  Index m_test = 0;

  // curve on curve
  int p = 1;
  double rho = 0.0;
  Index curve_points = 100;
  bool constant_fields = false;  // replaces every GP draw by 1 (test hook)

  // waveform surfaces
  Index wave_x1 = 60;
  Index wave_x2 = 50;
  Index wave_y1 = 60;
  Index wave_y2 = 40;
  Index rank_x1 = 2;
  Index rank_x2 = 3;
  Index rank_y = 3;
  double signal_rms = 1.5;  // RMS of the noiseless response entries, <= 0 keeps the raw scale

  // truncated cone
  Index cone_phi = 200;
  Index cone_z = 200;

  // curve with jump
  Index jump_points = 200;
  int spline_order = 4;
  Index knots_smooth = 1;
  Index knots_jump = 47;
  Index run_length = 5;

  // wafer overlay
  Index wafer_radial = 100;
  Index wafer_angular = 200;
  Index wafer_cartesian = 601;  // nodes per side of the square grid covering the wafer
  double wafer_radius = 150.0;  // mm
  double bow_first = 0.1;       // mm
  double bow_min = 0.03;
  double bow_max = 0.1;
  double wavelength_min = 2.0;
  double wavelength_max = 20.0;
  int waves_min = 2;
  int waves_max = 10;
  bool wafer_pir_y = false;  // emit the y-coordinate residual instead of x

  /// Study defaults for `kind`: sample sizes and noise level.
  static SimSpec defaults(SimKind kind);
  void validate() const;
  std::uint64_t effective_noise_seed() const { return noise_seed.value_or(seed); }
};

struct SimData {
  Dataset<double> train;
  Dataset<double> test;  // empty inputs when m_test == 0
  std::optional<Tensord> train_truth;  // noiseless responses
  std::optional<Tensord> test_truth;
  std::vector<Tensord> true_coefficients;  // waveform only
  std::vector<std::string> input_names;

  bool has_test() const { return !test.xs.empty(); }
};

SimData generate(const SimSpec& spec);

// Gaussian-process sampling.

enum class KernelKind {
  kMatern,       // (1 + 20|d| + (20|d|)^2 / 3) exp(-20|d|)
  kGaussian2,    // exp(-(2|d|)^2)
  kGaussian5,    // exp(-(5|d|)^2)
};

double kernel_value(KernelKind kind, double distance);
Matrixd gram(KernelKind kind, const Vectord& grid);

/// Draws from N(0, K) via K = E diag(max(lambda, 0)) E^T; the factor is computed once.
class GpSampler {
 public:
  GpSampler(KernelKind kind, const Vectord& grid);
  Vectord draw(Rng& rng) const;
  const Matrixd& factor() const { return factor_; }

 private:
  Matrixd factor_;
};

Vectord gp_sample(KernelKind kind, const Vectord& grid, std::uint64_t seed);

/// Clamped B-spline basis of the given order with `interior` equally spaced
/// interior knots on [0, 1], evaluated at `grid` (points in [0, 1]).
/// Returns grid.size() x (interior + order).
Matrixd bspline_basis(int order, Index interior, const Vectord& grid);

// Waveform-surface helpers.

/// Columns cos(2 pi t x_j) for odd t and sin(2 pi t x_j) for even t, t = 1..rank, x_j = j / n.
Matrixd fourier_factor(Index n, Index rank);

// Wafer geometry.

/// w(x, y) = bow (0.5 x^2 + y^2) / R^2 + sum_i h_i/2 (1 + sin(2 pi x / l_i)) + sum_i h_i/2 (1 + cos(2 pi y / l_i)).
struct WaferSurface {
  double bow = 0;
  std::vector<double> heights;
  std::vector<double> wavelengths;
};

/// Second-order central differences, one-sided second-order at both ends.
Vectord central_difference(const Vectord& f, double h);

/// Square Cartesian grid over the wafer plus the polar sampling grid. All
/// fields of a WaferSurface separate into a quadratic, a function of x and a
/// function of y, so node values are assembled from 1D arrays.
class WaferGrid {
 public:
  WaferGrid(double radius, Index cartesian, Index radial, Index angular);

  /// Surface height sampled on the polar grid (bilinear from the Cartesian nodes).
  Matrixd height(const WaferSurface& s) const;
  /// Residual in-plane distortion of one coordinate (0 = x, 1 = y): the
  /// negative gradient by finite differences, minus its least-squares
  /// second-order polynomial fit over in-wafer nodes, sampled on the polar grid.
  Matrixd residual_distortion(const WaferSurface& s, int axis) const;
  /// Same field before the polynomial correction.
  Matrixd distortion(const WaferSurface& s, int axis) const;

  const Vectord& nodes() const { return nodes_; }
  double spacing() const { return h_; }
  Index radial() const { return radial_; }
  Index angular() const { return angular_; }
  double radius() const { return radius_; }
  /// Polar sample location (radial index i, angular index j).
  std::pair<double, double> polar_point(Index i, Index j) const;

 private:
  Vectord along_axis(const WaferSurface& s, int axis) const;  // NT part of w along one axis
  Matrixd sample(const Vectord& fx, const Vectord& fy, const Eigen::Matrix<double, 6, 1>& poly) const;
  Eigen::Matrix<double, 6, 1> correction(const Vectord& g, int axis) const;

  double radius_;
  double h_;
  Index radial_;
  Index angular_;
  Vectord nodes_;
  Matrixd disc_sums_;  // [node, k]: sum over in-disc nodes of the column/row of y^k (k = 0..4) and counts
  Eigen::Matrix<double, 6, 6> gram_;
};

}  // namespace mtot

#include "mtot/simgen.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "mtot/multilinear.hpp"

namespace mtot {

namespace {

// Stream identifiers for derive_seed.
enum Stream : std::uint64_t {
  kShared = 1,
  kTrainSample = 2,
  kTestSample = 3,
  kTrainNoise = 4,
  kTestNoise = 5,
};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Rng sample_rng(const SimSpec& spec, bool test, Index m) {
  return Rng(derive_seed(spec.seed, test ? kTestSample : kTrainSample, static_cast<std::uint64_t>(m)));
}

Rng noise_rng(const SimSpec& spec, bool test, Index m) {
  return Rng(derive_seed(spec.effective_noise_seed(), test ? kTestNoise : kTrainNoise, static_cast<std::uint64_t>(m)));
}

void add_noise(const SimSpec& spec, bool test, Tensord& y) {
  if (spec.sigma == 0.0) return;
  const Index m = y.extent(0);
  const Index stride = y.size() / m;
  for (Index i = 0; i < m; ++i) {
    Rng rng = noise_rng(spec, test, i);
    double* row = y.data() + i * stride;
    for (Index k = 0; k < stride; ++k) row[k] += spec.sigma * rng.normal();
  }
}

Shape with_samples(Index m, Shape rest) {
  rest.insert(rest.begin(), m);
  return rest;
}

Vectord normal_vector(Index n, Rng& rng) {
  Vectord v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

Tensord normal_tensor(const Shape& shape, Rng& rng) {
  Tensord t(shape);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

// Fills a split (train or test) through a per-sample callback that writes
// one row of every input and of the noiseless response.
struct Split {
  std::vector<Tensord> xs;
  Tensord truth;
};

template <typename Fill>
Split build_split(Index m, const std::vector<Shape>& input_shapes, const Shape& output_shape, Fill&& fill) {
  Split s;
  for (const auto& shape : input_shapes) s.xs.emplace_back(with_samples(m, shape));
  s.truth = Tensord(with_samples(m, output_shape));
  std::vector<double*> rows(input_shapes.size());
  for (Index i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < rows.size(); ++j) rows[j] = s.xs[j].data() + i * (s.xs[j].size() / m);
    fill(i, rows, s.truth.data() + i * (s.truth.size() / m));
  }
  return s;
}

void finish(const SimSpec& spec, bool test, Split&& split, SimData& out) {
  Dataset<double> data;
  data.xs = std::move(split.xs);
  data.y = split.truth;
  add_noise(spec, test, data.y);
  if (test) {
    out.test = std::move(data);
    out.test_truth = std::move(split.truth);
  } else {
    out.train = std::move(data);
    out.train_truth = std::move(split.truth);
  }
}

// ---------------------------------------------------------------------------

SimData gen_curve_on_curve(const SimSpec& spec) {
  const Index n = spec.curve_points;
  const int p = spec.p;
  Vectord s(n), t(n);
  for (Index i = 0; i < n; ++i) {
    s(i) = 2.0 * static_cast<double>(i) / static_cast<double>(n);
    t(i) = static_cast<double>(i) / static_cast<double>(n);
  }
  const double ds = 2.0 / static_cast<double>(n);

  const GpSampler matern_s(KernelKind::kMatern, s), matern_t(KernelKind::kMatern, t);
  const GpSampler smooth_s(KernelKind::kGaussian2, s), scalar_t(KernelKind::kGaussian5, t);
  auto draw = [&](const GpSampler& g, Rng& rng) -> Vectord {
    return spec.constant_fields ? Vectord(Vectord::Ones(n)) : g.draw(rng);
  };

  // Shared coefficient functions.
  Rng shared(derive_seed(spec.seed, kShared));
  std::vector<Matrixd> coef(static_cast<std::size_t>(p));  // s x t
  for (auto& b : coef) {
    b = Matrixd::Zero(n, n);
    for (int k = 0; k < 3; ++k) {
      const Vectord gamma = draw(matern_t, shared);
      const Vectord psi = draw(matern_s, shared);
      b += psi * gamma.transpose();
    }
    b /= static_cast<double>(p * p);
  }
  Matrixd alpha(n, 5);
  for (Index k = 0; k < 5; ++k) alpha.col(k) = draw(scalar_t, shared);

  auto equicorrelated = [](Index dim, double rho) {
    Matrixd m = Matrixd::Constant(dim, dim, rho);
    m.diagonal().setOnes();
    Eigen::LLT<Matrixd> llt(m);
    if (llt.info() != Eigen::Success) throw ConfigError("curve_on_curve: correlation matrix is not positive definite");
    return Matrixd(llt.matrixL());
  };
  const Matrixd delta = equicorrelated(p, spec.rho);
  const Matrixd scalar_chol = equicorrelated(5, 0.5);

  std::vector<Shape> in_shapes{{5}};
  for (int i = 0; i < p; ++i) in_shapes.push_back({n});

  SimData out;
  out.input_names.push_back("u");
  for (int i = 0; i < p; ++i) out.input_names.push_back("x" + std::to_string(i + 1));

  for (bool test : {false, true}) {
    const Index m = test ? spec.m_test : spec.m_train;
    if (m == 0) continue;
    auto split = build_split(m, in_shapes, {n}, [&](Index i, std::vector<double*>& rows, double* y) {
      Rng rng = sample_rng(spec, test, i);
      const Vectord u = scalar_chol * normal_vector(5, rng);
      Matrixd w(n, p);
      for (int k = 0; k < p; ++k) w.col(k) = draw(smooth_s, rng);
      const Matrixd x = w * delta.transpose();
      Eigen::Map<Vectord>(rows[0], 5) = u;
      Vectord resp = alpha * u;
      for (int k = 0; k < p; ++k) {
        Eigen::Map<Vectord>(rows[static_cast<std::size_t>(k) + 1], n) = x.col(k);
        resp += ds * (coef[static_cast<std::size_t>(k)].transpose() * x.col(k));
      }
      Eigen::Map<Vectord>(y, n) = resp;
    });
    finish(spec, test, std::move(split), out);
  }
  return out;
}

SimData gen_waveform(const SimSpec& spec) {
  const Matrixd u1 = fourier_factor(spec.wave_x1, spec.rank_x1);
  const Matrixd u2 = fourier_factor(spec.wave_x2, spec.rank_x2);
  const Matrixd v1 = fourier_factor(spec.wave_y1, spec.rank_y);
  const Matrixd v2 = fourier_factor(spec.wave_y2, spec.rank_y);

  Rng shared(derive_seed(spec.seed, kShared));
  const Index r = spec.rank_y;
  Tensord c1 = normal_tensor({spec.rank_x1, r, r}, shared);
  Tensord c2 = normal_tensor({spec.rank_x2, spec.rank_x2, r, r}, shared);

  // Scale so the expected mean square of a noiseless response entry is
  // signal_rms^2; with standard normal input cores that expectation is the
  // squared norm of B contracted with the input factors.
  if (spec.signal_rms > 0) {
    const Matrixd g1 = u1.transpose() * u1;
    const Matrixd g2 = u2.transpose() * u2;
    const Tensord h1 = multi_mode_product<double>(c1, std::vector<Matrixd>{g1, v1, v2}, std::vector<Index>{0, 1, 2});
    const Tensord h2 =
        multi_mode_product<double>(c2, std::vector<Matrixd>{g2, g2, v1, v2}, std::vector<Index>{0, 1, 2, 3});
    const double ms = (squared_norm(h1) + squared_norm(h2)) / static_cast<double>(spec.wave_y1 * spec.wave_y2);
    const double scale = ms > 0 ? spec.signal_rms / std::sqrt(ms) : 1.0;
    c1 *= scale;
    c2 *= scale;
  }
  const Tensord b1 = multi_mode_product<double>(c1, std::vector<Matrixd>{u1, v1, v2}, std::vector<Index>{0, 1, 2});
  const Tensord b2 =
      multi_mode_product<double>(c2, std::vector<Matrixd>{u2, u2, v1, v2}, std::vector<Index>{0, 1, 2, 3});

  SimData out;
  out.input_names = {"profile", "image"};
  const std::vector<Shape> in_shapes{{spec.wave_x1}, {spec.wave_x2, spec.wave_x2}};
  for (bool test : {false, true}) {
    const Index m = test ? spec.m_test : spec.m_train;
    if (m == 0) continue;
    Split split;
    split.xs = {Tensord(with_samples(m, in_shapes[0])), Tensord(with_samples(m, in_shapes[1]))};
    const Index s1 = spec.wave_x1, s2 = spec.wave_x2 * spec.wave_x2;
    for (Index i = 0; i < m; ++i) {
      Rng rng = sample_rng(spec, test, i);
      const Vectord d1 = normal_vector(spec.rank_x1, rng);
      Matrixd d2(spec.rank_x2, spec.rank_x2);
      for (Index a = 0; a < spec.rank_x2; ++a)
        for (Index b = 0; b < spec.rank_x2; ++b) d2(a, b) = rng.normal();
      Eigen::Map<Vectord>(split.xs[0].data() + i * s1, s1) = u1 * d1;
      const RowMajorMatrixX<double> x2 = u2 * d2 * u2.transpose();
      Eigen::Map<Vectord>(split.xs[1].data() + i * s2, s2) = Eigen::Map<const Vectord>(x2.data(), s2);
    }
    split.truth = batch_contract(split.xs[0], b1);
    split.truth += batch_contract(split.xs[1], b2);
    finish(spec, test, std::move(split), out);
  }
  out.true_coefficients = {b1, b2};
  return out;
}

struct ConeParams {
  double r0, theta, e, c;
};

SimData gen_cone(const SimSpec& spec) {
  const Index nphi = spec.cone_phi, nz = spec.cone_z;
  Vectord phi(nphi), z(nz);
  for (Index i = 0; i < nphi; ++i) phi(i) = kTwoPi * static_cast<double>(i + 1) / static_cast<double>(nphi);
  for (Index j = 0; j < nz; ++j) z(j) = static_cast<double>(j + 1) / static_cast<double>(nz);

  std::vector<ConeParams> factorial;
  for (double r0 : {1.1, 1.3, 1.5})
    for (double th : {0.0, std::numbers::pi / 8, std::numbers::pi / 4})
      for (double e : {0.0, 0.3, 0.5})
        for (double c : {-1.0, 0.0, 1.0}) factorial.push_back({r0, th, e, c});

  SimData out;
  out.input_names = {"radius", "slope", "eccentricity", "curvature"};
  const std::vector<Shape> in_shapes{{1}, {nz}, {nphi}, {nz}};
  for (bool test : {false, true}) {
    const Index m = test ? spec.m_test : spec.m_train;
    if (m == 0) continue;
    auto split = build_split(m, in_shapes, {nphi, nz}, [&](Index i, std::vector<double*>& rows, double* y) {
      ConeParams q;
      if (test) {
        Rng rng = sample_rng(spec, test, i);
        q.r0 = rng.uniform(1.1, 1.5);
        q.theta = rng.uniform(0.0, std::numbers::pi / 4);
        q.e = rng.uniform(0.0, 0.5);
        q.c = rng.uniform(-1.0, 1.0);
      } else {
        q = factorial[static_cast<std::size_t>(i)];
      }
      const double tan_theta = std::tan(q.theta);
      rows[0][0] = q.r0;
      for (Index j = 0; j < nz; ++j) {
        rows[1][j] = z(j) * tan_theta;
        rows[3][j] = q.c * (z(j) * z(j) - z(j));
      }
      for (Index k = 0; k < nphi; ++k) {
        const double cs = std::cos(phi(k));
        rows[2][k] = q.e * q.e * cs * cs;
        const double denom = std::sqrt(1.0 - q.e * q.e * cs * cs);
        for (Index j = 0; j < nz; ++j) y[k * nz + j] = (q.r0 + z(j) * tan_theta) / denom + q.c * (z(j) * z(j) - z(j));
      }
    });
    finish(spec, test, std::move(split), out);
  }
  return out;
}

SimData gen_jump(const SimSpec& spec) {
  const Index n = spec.jump_points;
  Vectord t(n);
  for (Index i = 0; i < n; ++i) t(i) = static_cast<double>(i + 1) / static_cast<double>(n);
  const Matrixd b1 = bspline_basis(spec.spline_order, spec.knots_smooth, t);
  const Matrixd b2 = bspline_basis(spec.spline_order, spec.knots_jump, t);
  const Index k1 = b1.cols(), k2 = b2.cols();
  const Index starts = k2 - spec.run_length + 1;

  SimData out;
  out.input_names = {"dense", "sparse"};
  const std::vector<Shape> in_shapes{{k1}, {k2}};
  for (bool test : {false, true}) {
    const Index m = test ? spec.m_test : spec.m_train;
    if (m == 0) continue;
    auto split = build_split(m, in_shapes, {n}, [&](Index i, std::vector<double*>& rows, double* y) {
      Rng rng = sample_rng(spec, test, i);
      Eigen::Map<Vectord> x1(rows[0], k1), x2(rows[1], k2);
      for (Index k = 0; k < k1; ++k) x1(k) = rng.uniform();
      x2.setZero();
      const Index start = rng.uniform_int(0, starts - 1);
      x2.segment(start, spec.run_length).setOnes();
      Eigen::Map<Vectord>(y, n) = b1 * x1 + b2 * x2;
    });
    finish(spec, test, std::move(split), out);
  }
  return out;
}

SimData gen_wafer(const SimSpec& spec) {
  const WaferGrid grid(spec.wafer_radius, spec.wafer_cartesian, spec.wafer_radial, spec.wafer_angular);
  const Index nr = spec.wafer_radial, nt = spec.wafer_angular;
  const int axis = spec.wafer_pir_y ? 1 : 0;

  SimData out;
  out.input_names = {"shape_change"};
  const std::vector<Shape> in_shapes{{nr, nt}};
  for (bool test : {false, true}) {
    const Index m = test ? spec.m_test : spec.m_train;
    if (m == 0) continue;
    auto split = build_split(m, in_shapes, {nr, nt}, [&](Index i, std::vector<double*>& rows, double* y) {
      Rng rng = sample_rng(spec, test, i);
      // IPD is linear in the shape, so the layer difference of IPDs equals
      // the IPD of the shape difference w2 - w1.
      WaferSurface diff;
      diff.bow = rng.uniform(spec.bow_min, spec.bow_max) - spec.bow_first;
      const auto waves = rng.uniform_int(spec.waves_min, spec.waves_max);
      for (std::int64_t k = 0; k < waves; ++k) {
        const double lambda = rng.uniform(spec.wavelength_min, spec.wavelength_max);
        diff.wavelengths.push_back(lambda);
        diff.heights.push_back(rng.uniform(lambda * 1e-7, lambda * 1e-6));
      }
      const Matrixd w = grid.height(diff);
      const Matrixd pir = grid.residual_distortion(diff, axis);
      for (Index a = 0; a < nr; ++a)
        for (Index b = 0; b < nt; ++b) {
          rows[0][a * nt + b] = w(a, b);
          y[a * nt + b] = pir(a, b);
        }
    });
    finish(spec, test, std::move(split), out);
    if (test)
      out.test_truth.reset();
    else
      out.train_truth.reset();
  }
  return out;
}

}  // namespace

std::string to_string(SimKind kind) {
  switch (kind) {
    case SimKind::kCurveOnCurve: return "curve_on_curve";
    case SimKind::kWaveform: return "waveform";
    case SimKind::kCone: return "cone";
    case SimKind::kJump: return "jump";
    case SimKind::kWafer: return "wafer";
  }
  return "unknown";
}

SimKind parse_sim_kind(std::string_view name) {
  if (name == "curve_on_curve" || name == "curve") return SimKind::kCurveOnCurve;
  if (name == "waveform") return SimKind::kWaveform;
  if (name == "cone") return SimKind::kCone;
  if (name == "jump") return SimKind::kJump;
  if (name == "wafer") return SimKind::kWafer;
  throw ConfigError("unknown simulation kind '" + std::string(name) + "'");
}

SimSpec SimSpec::defaults(SimKind kind) {
  SimSpec s;
  s.kind = kind;
  switch (kind) {
    case SimKind::kCurveOnCurve:
      s.m_train = 400;
      s.m_test = 100;
      s.sigma = std::sqrt(0.1);
      break;
    case SimKind::kWaveform:
      s.m_train = 160;
      s.m_test = 40;
      s.sigma = 0.1;
      break;
    case SimKind::kCone:
      s.m_train = 81;
      s.m_test = 1000;
      s.sigma = 0.01;
      break;
    case SimKind::kJump:
      s.m_train = 400;
      s.m_test = 100;
      s.sigma = 0.1;
      break;
    case SimKind::kWafer:
      s.m_train = 500;
      s.m_test = 100;
      s.sigma = 0.0;
      break;
  }
  return s;
}

void SimSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be a finite nonnegative number");
  if (m_train < 1) throw ConfigError("m_train must be positive");
  if (m_test < 0) throw ConfigError("m_test must be nonnegative");
  switch (kind) {
    case SimKind::kCurveOnCurve:
      if (p < 1) throw ConfigError("p must be positive");
      if (!(rho > -1.0 / p && rho < 1.0) && p > 1) throw ConfigError("rho must keep the correlation matrix definite");
      if (curve_points < 2) throw ConfigError("curve_points must be at least 2");
      break;
    case SimKind::kWaveform:
      if (rank_x1 < 1 || rank_x2 < 1 || rank_y < 1) throw ConfigError("waveform ranks must be positive");
      if (rank_x1 > wave_x1 || rank_x2 > wave_x2 || rank_y > std::min(wave_y1, wave_y2))
        throw ConfigError("waveform ranks exceed the extents");
      break;
    case SimKind::kCone:
      if (m_train != 81) throw ConfigError("cone training data is the 81-run factorial; m_train must be 81");
      if (cone_phi < 1 || cone_z < 1) throw ConfigError("cone grid must be positive");
      break;
    case SimKind::kJump:
      if (spline_order < 1 || knots_smooth < 0 || knots_jump < 0) throw ConfigError("invalid spline settings");
      if (run_length < 1 || run_length > knots_jump + spline_order) throw ConfigError("run_length out of range");
      if (jump_points < 1) throw ConfigError("jump_points must be positive");
      break;
    case SimKind::kWafer:
      if (wafer_radial < 1 || wafer_angular < 1 || wafer_cartesian < 3) throw ConfigError("wafer grid too small");
      if (!(wafer_radius > 0)) throw ConfigError("wafer radius must be positive");
      if (waves_min < 0 || waves_max < waves_min) throw ConfigError("invalid waveform count range");
      if (!(wavelength_min > 0) || wavelength_max < wavelength_min) throw ConfigError("invalid wavelength range");
      if (bow_max < bow_min) throw ConfigError("invalid bow range");
      break;
  }
}

SimData generate(const SimSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case SimKind::kCurveOnCurve: return gen_curve_on_curve(spec);
    case SimKind::kWaveform: return gen_waveform(spec);
    case SimKind::kCone: return gen_cone(spec);
    case SimKind::kJump: return gen_jump(spec);
    case SimKind::kWafer: return gen_wafer(spec);
  }
  throw ConfigError("unknown simulation kind");
}

// ---------------------------------------------------------------------------

double kernel_value(KernelKind kind, double distance) {
  const double d = std::abs(distance);
  switch (kind) {
    case KernelKind::kMatern: {
      const double a = 20.0 * d;
      return (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
    case KernelKind::kGaussian2: return std::exp(-(2.0 * d) * (2.0 * d));
    case KernelKind::kGaussian5: return std::exp(-(5.0 * d) * (5.0 * d));
  }
  return 0.0;
}

Matrixd gram(KernelKind kind, const Vectord& grid) {
  const Index n = grid.size();
  Matrixd k(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) k(i, j) = kernel_value(kind, grid(i) - grid(j));
  return k;
}

GpSampler::GpSampler(KernelKind kind, const Vectord& grid) {
  if (grid.size() == 0) throw ConfigError("gp_sample: empty grid");
  Eigen::SelfAdjointEigenSolver<Matrixd> eig(gram(kind, grid));
  if (eig.info() != Eigen::Success) throw NumericalError("gp_sample: eigendecomposition failed");
  factor_ = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Vectord GpSampler::draw(Rng& rng) const { return factor_ * normal_vector(factor_.cols(), rng); }

Vectord gp_sample(KernelKind kind, const Vectord& grid, std::uint64_t seed) {
  Rng rng(seed);
  return GpSampler(kind, grid).draw(rng);
}

Matrixd bspline_basis(int order, Index interior, const Vectord& grid) {
  if (order < 1) throw ConfigError("bspline_basis: order must be at least 1");
  if (interior < 0) throw ConfigError("bspline_basis: negative knot count");
  for (Index i = 0; i < grid.size(); ++i)
    if (!(grid(i) >= 0.0 && grid(i) <= 1.0)) throw ConfigError("bspline_basis: grid point outside [0, 1]");

  const Index nb = interior + order;
  std::vector<double> knots;
  for (int k = 0; k < order; ++k) knots.push_back(0.0);
  for (Index k = 1; k <= interior; ++k) knots.push_back(static_cast<double>(k) / static_cast<double>(interior + 1));
  for (int k = 0; k < order; ++k) knots.push_back(1.0);
  const auto nk = static_cast<Index>(knots.size());

  Matrixd out(grid.size(), nb);
  std::vector<double> n(static_cast<std::size_t>(nk));
  for (Index g = 0; g < grid.size(); ++g) {
    const double x = grid(g);
    std::fill(n.begin(), n.end(), 0.0);
    // Order one: half-open spans, with x = 1 assigned to the last nonempty span.
    for (Index i = 0; i + 1 < nk; ++i) {
      const double a = knots[static_cast<std::size_t>(i)], b = knots[static_cast<std::size_t>(i) + 1];
      if (a < b && ((x >= a && x < b) || (x == 1.0 && b == 1.0))) {
        n[static_cast<std::size_t>(i)] = 1.0;
        break;
      }
    }
    for (int k = 2; k <= order; ++k) {
      for (Index i = 0; i + k < nk; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double left_den = knots[ui + static_cast<std::size_t>(k) - 1] - knots[ui];
        const double right_den = knots[ui + static_cast<std::size_t>(k)] - knots[ui + 1];
        double v = 0.0;
        if (left_den > 0) v += (x - knots[ui]) / left_den * n[ui];
        if (right_den > 0) v += (knots[ui + static_cast<std::size_t>(k)] - x) / right_den * n[ui + 1];
        n[ui] = v;
      }
    }
    for (Index i = 0; i < nb; ++i) out(g, i) = n[static_cast<std::size_t>(i)];
  }
  return out;
}

Matrixd fourier_factor(Index n, Index rank) {
  Matrixd u(n, rank);
  for (Index t = 1; t <= rank; ++t)
    for (Index j = 1; j <= n; ++j) {
      const double arg = kTwoPi * static_cast<double>(t) * static_cast<double>(j) / static_cast<double>(n);
      u(j - 1, t - 1) = (t % 2 == 1) ? std::cos(arg) : std::sin(arg);
    }
  return u;
}

}  // namespace mtot

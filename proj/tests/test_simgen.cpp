#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "mtot/decomposition.hpp"
#include "mtot/simgen.hpp"
#include "oracles.hpp"

using namespace mtot;

namespace {

SimSpec small(SimKind kind, std::uint64_t seed) {
  SimSpec s = SimSpec::defaults(kind);
  s.seed = seed;
  switch (kind) {
    case SimKind::kCurveOnCurve:
      s.m_train = 12;
      s.m_test = 5;
      s.curve_points = 20;
      s.p = 2;
      s.rho = 0.5;
      break;
    case SimKind::kWaveform:
      s.m_train = 12;
      s.m_test = 4;
      s.wave_x1 = 12;
      s.wave_x2 = 10;
      s.wave_y1 = 9;
      s.wave_y2 = 8;
      break;
    case SimKind::kCone:
      s.m_test = 5;
      s.cone_phi = 16;
      s.cone_z = 12;
      break;
    case SimKind::kJump:
      s.m_train = 10;
      s.m_test = 4;
      break;
    case SimKind::kWafer:
      s.m_train = 4;
      s.m_test = 2;
      s.wafer_radial = 10;
      s.wafer_angular = 20;
      s.wafer_cartesian = 121;
      s.sigma = 0.0;
      break;
  }
  return s;
}

bool same(const SimData& a, const SimData& b) {
  if (!(a.train.y == b.train.y) || !(a.test.y == b.test.y)) return false;
  if (a.train.xs.size() != b.train.xs.size()) return false;
  for (std::size_t j = 0; j < a.train.xs.size(); ++j)
    if (!(a.train.xs[j] == b.train.xs[j]) || !(a.test.xs[j] == b.test.xs[j])) return false;
  return true;
}

Matrixd sample_covariance(const std::vector<Vectord>& draws) {
  const Index n = draws.front().size();
  Matrixd c = Matrixd::Zero(n, n);
  for (const auto& d : draws) c += d * d.transpose();
  return c / static_cast<double>(draws.size());
}

const std::vector<SimKind> kAllKinds{SimKind::kCurveOnCurve, SimKind::kWaveform, SimKind::kCone, SimKind::kJump,
                                     SimKind::kWafer};

}  // namespace

TEST_CASE("kind names round-trip") {
  for (SimKind k : kAllKinds) CHECK(parse_sim_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_sim_kind("torus"), ConfigError);
}

TEST_CASE("kernels") {
  for (KernelKind k : {KernelKind::kMatern, KernelKind::kGaussian2, KernelKind::kGaussian5})
    CHECK(kernel_value(k, 0.0) == 1.0);
  CHECK(kernel_value(KernelKind::kMatern, 0.05) == doctest::Approx((1 + 1 + 1.0 / 3) * std::exp(-1.0)));
  CHECK(kernel_value(KernelKind::kGaussian2, 0.5) == doctest::Approx(std::exp(-1.0)));
  CHECK(kernel_value(KernelKind::kGaussian5, -0.2) == doctest::Approx(std::exp(-1.0)));
  // The squared-exponential reading decays with distance.
  CHECK(kernel_value(KernelKind::kGaussian5, 1.0) < 1e-10);
  Vectord grid(30);
  for (Index i = 0; i < 30; ++i) grid(i) = static_cast<double>(i) / 30.0;
  for (KernelKind k : {KernelKind::kMatern, KernelKind::kGaussian2, KernelKind::kGaussian5}) {
    const Matrixd g = gram(k, grid);
    CHECK((g - g.transpose()).norm() == 0.0);
    const Matrixd f = GpSampler(k, grid).factor();
    CHECK((f * f.transpose() - g).norm() < 1e-8 * g.norm());
  }
}

TEST_CASE("single-point GP draws are standard normal") {
  const Vectord point = Vectord::Constant(1, 0.3);
  const GpSampler s(KernelKind::kGaussian2, point);
  CHECK(s.factor()(0, 0) == doctest::Approx(1.0));
  Rng rng(1);
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = s.draw(rng)(0);
    sum += v;
    sq += v * v;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(sq / n == doctest::Approx(1.0).epsilon(0.04));
  CHECK(gp_sample(KernelKind::kMatern, point, 5) == gp_sample(KernelKind::kMatern, point, 5));
}

TEST_CASE("GP sample covariance matches the kernel") {
  Vectord grid(5);
  grid << 0.0, 0.1, 0.2, 0.35, 0.6;
  for (KernelKind k : {KernelKind::kMatern, KernelKind::kGaussian2, KernelKind::kGaussian5}) {
    const GpSampler s(k, grid);
    Rng rng(derive_seed(77, static_cast<std::uint64_t>(k)));
    std::vector<Vectord> draws;
    for (int i = 0; i < 10000; ++i) draws.push_back(s.draw(rng));
    const Matrixd g = gram(k, grid);
    CHECK((sample_covariance(draws) - g).norm() <= 0.05 * g.norm());
  }
}

TEST_CASE("B-spline bases") {
  Vectord grid(201);
  for (Index i = 0; i <= 200; ++i) grid(i) = static_cast<double>(i) / 200.0;
  const Matrixd ones = bspline_basis(1, 0, grid);
  CHECK(ones.cols() == 1);
  CHECK((ones.array() == 1.0).all());
  for (int order : {1, 2, 3, 4}) {
    for (Index interior : {0, 1, 5, 47}) {
      const Matrixd b = bspline_basis(order, interior, grid);
      CHECK(b.cols() == interior + order);
      CHECK((b.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
      CHECK(b.minCoeff() >= 0.0);
    }
  }
  CHECK(bspline_basis(4, 1, grid).cols() == 5);
  CHECK(bspline_basis(4, 47, grid).cols() == 51);
  // Clamped ends interpolate the first and last coefficients.
  const Matrixd b = bspline_basis(4, 3, grid);
  CHECK(b(0, 0) == 1.0);
  CHECK(b(200, 6) == 1.0);
  // Order-2 splines are hat functions: the middle basis function peaks at its knot.
  const Matrixd hat = bspline_basis(2, 1, grid);
  CHECK(hat(100, 1) == doctest::Approx(1.0));
  CHECK(hat(50, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(bspline_basis(0, 1, grid), ConfigError);
  CHECK_THROWS_AS(bspline_basis(4, 1, Vectord::Constant(1, 1.5)), ConfigError);
}

TEST_CASE("generators are pure functions of their spec") {
  for (SimKind k : kAllKinds) {
    const SimSpec spec = small(k, 9);
    const SimData a = generate(spec), b = generate(spec);
    CHECK(same(a, b));
    SimSpec other = spec;
    other.seed = 10;
    CHECK_FALSE(same(a, generate(other)));
    CHECK(a.has_test());
    CHECK(a.train.xs.size() == a.input_names.size());
  }
}

TEST_CASE("noise stream separation") {
  for (SimKind k : kAllKinds) {
    SimSpec spec = small(k, 21);
    spec.sigma = 0.0;
    SimSpec other = spec;
    other.noise_seed = 1234;
    CHECK(same(generate(spec), generate(other)));
  }
  SimSpec noisy = small(SimKind::kJump, 21);
  noisy.sigma = 0.2;
  SimSpec other = noisy;
  other.noise_seed = 1234;
  const SimData a = generate(noisy), b = generate(other);
  CHECK(a.train.xs[0] == b.train.xs[0]);
  CHECK(*a.train_truth == *b.train_truth);
  CHECK_FALSE(a.train.y == b.train.y);
  // Noise is added to the truth with the requested scale.
  const Tensord noise = a.train.y - *a.train_truth;
  const double rms = std::sqrt(squared_norm(noise) / static_cast<double>(noise.size()));
  CHECK(rms == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("curve on curve with constant fields") {
  SimSpec spec = SimSpec::defaults(SimKind::kCurveOnCurve);
  spec.seed = 3;
  spec.sigma = 0.0;
  spec.p = 1;
  spec.m_train = 5;
  spec.m_test = 0;
  spec.constant_fields = true;
  const SimData sim = generate(spec);
  CHECK_FALSE(sim.has_test());
  REQUIRE(sim.train.xs.size() == 2);
  CHECK(sim.train.xs[0].shape() == Shape{5, 5});
  CHECK(sim.train.xs[1].shape() == Shape{5, 100});
  // With every field equal to one: x(s) = 1 and B(s, t) is the sum of three
  // unit products, so the integral over (0, 2) contributes 3 * 2 = 6.
  CHECK((sim.train.xs[1].values().array() == 1.0).all());
  for (Index m = 0; m < 5; ++m) {
    double u = 0;
    for (Index k = 0; k < 5; ++k) u += sim.train.xs[0]({m, k});
    for (Index t = 0; t < 100; ++t) CHECK(sim.train.y({m, t}) == doctest::Approx(u + 6.0).epsilon(1e-12));
  }
}

TEST_CASE("curve predictors are correlated through the mixing matrix") {
  SimSpec spec = SimSpec::defaults(SimKind::kCurveOnCurve);
  spec.seed = 4;
  spec.p = 3;
  spec.rho = 0.5;
  spec.m_train = 10000;
  spec.m_test = 0;
  spec.curve_points = 40;
  const SimData sim = generate(spec);
  const Index s = 17;
  std::vector<Vectord> cols;
  for (int i = 1; i <= 3; ++i) {
    Vectord c(spec.m_train);
    for (Index m = 0; m < spec.m_train; ++m) c(m) = sim.train.xs[static_cast<std::size_t>(i)]({m, s});
    cols.push_back(c);
  }
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      const Vectord x = cols[static_cast<std::size_t>(a)].array() - cols[static_cast<std::size_t>(a)].mean();
      const Vectord y = cols[static_cast<std::size_t>(b)].array() - cols[static_cast<std::size_t>(b)].mean();
      const double r = x.dot(y) / (x.norm() * y.norm());
      CHECK(std::abs(r - 0.5) < 0.05);
    }
  // The five scalar predictors are equicorrelated at 0.5.
  Vectord u0(spec.m_train), u1(spec.m_train);
  for (Index m = 0; m < spec.m_train; ++m) {
    u0(m) = sim.train.xs[0]({m, 0});
    u1(m) = sim.train.xs[0]({m, 3});
  }
  const Vectord x = u0.array() - u0.mean(), y = u1.array() - u1.mean();
  CHECK(std::abs(x.dot(y) / (x.norm() * y.norm()) - 0.5) < 0.05);
}

TEST_CASE("waveform responses are exactly representable") {
  SimSpec spec = SimSpec::defaults(SimKind::kWaveform);
  spec.seed = 5;
  spec.sigma = 0.0;
  spec.m_train = 40;
  spec.m_test = 10;
  const SimData sim = generate(spec);
  CHECK(sim.train.xs[0].shape() == Shape{40, 60});
  CHECK(sim.train.xs[1].shape() == Shape{40, 50, 50});
  CHECK(sim.train.y.shape() == Shape{40, 60, 40});
  REQUIRE(sim.true_coefficients.size() == 2);
  const double y2 = squared_norm(sim.train.y);
  CHECK(oracle::loss(sim.train.y, sim.train.xs, sim.true_coefficients) <= 1e-20 * y2);
  CHECK(numerical_rank(oracle::unfold(sim.train.xs[1], 1)) == 3);
  CHECK(numerical_rank(oracle::unfold(sim.train.xs[0], 0)) == 2);
  // The noiseless response is scaled to an entry RMS of about signal_rms.
  const double rms = std::sqrt(y2 / static_cast<double>(sim.train.y.size()));
  CHECK(rms > 0.7 * spec.signal_rms);
  CHECK(rms < 1.4 * spec.signal_rms);

  const Matrixd f = fourier_factor(8, 3);
  CHECK(f(0, 0) == doctest::Approx(std::cos(2 * std::numbers::pi / 8)));
  CHECK(f(1, 1) == doctest::Approx(std::sin(2 * std::numbers::pi * 2 * 2 / 8)));
}

TEST_CASE("cone surfaces") {
  SimSpec spec = SimSpec::defaults(SimKind::kCone);
  spec.seed = 6;
  spec.sigma = 0.0;
  spec.m_test = 20;
  spec.cone_phi = 40;
  spec.cone_z = 30;
  const SimData sim = generate(spec);
  CHECK(sim.train.y.shape() == Shape{81, 40, 30});
  CHECK(sim.train.xs[0].shape() == Shape{81, 1});
  const Tensord& y = *sim.train_truth;
  // Second factorial run: r0 = 1.1 with theta = e = c = 0 is a cylinder.
  for (Index i = 0; i < 40; ++i)
    for (Index j = 0; j < 30; ++j) CHECK(y({1, i, j}) == doctest::Approx(1.1).epsilon(1e-14));
  // Run 7: r0 = 1.1, theta = 0, e = 0.5, c = 0, independent of z.
  for (Index i = 0; i < 40; ++i) {
    const double phi = 2 * std::numbers::pi * static_cast<double>(i + 1) / 40.0;
    const double expected = 1.1 / std::sqrt(1.0 - 0.25 * std::cos(phi) * std::cos(phi));
    CHECK(y({7, i, 0}) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(y({7, i, 29}) == doctest::Approx(expected).epsilon(1e-14));
  }
  for (Index m = 0; m < 20; ++m) {
    CHECK(sim.test.xs[0]({m, 0}) >= 1.1);
    CHECK(sim.test.xs[0]({m, 0}) <= 1.5);
  }
  SimSpec bad = spec;
  bad.m_train = 80;
  CHECK_THROWS_AS(generate(bad), ConfigError);
}

TEST_CASE("jump curves") {
  SimSpec spec = SimSpec::defaults(SimKind::kJump);
  spec.seed = 7;
  spec.sigma = 0.0;
  spec.m_train = 10000;
  spec.m_test = 0;
  const SimData sim = generate(spec);
  CHECK(sim.train.xs[0].shape() == Shape{10000, 5});
  CHECK(sim.train.xs[1].shape() == Shape{10000, 51});
  CHECK(sim.train.y.shape() == Shape{10000, 200});

  Vectord t(200);
  for (Index i = 0; i < 200; ++i) t(i) = static_cast<double>(i + 1) / 200.0;
  const Matrixd b1 = bspline_basis(4, 1, t), b2 = bspline_basis(4, 47, t);
  const Matrixd x1 = oracle::unfold(sim.train.xs[0], 0), x2 = oracle::unfold(sim.train.xs[1], 0);
  const Matrixd expected = x1 * b1.transpose() + x2 * b2.transpose();
  CHECK(oracle::relative_error(oracle::unfold(sim.train.y, 0), expected) < 1e-14);

  std::vector<double> counts(47, 0.0);
  for (Index m = 0; m < 10000; ++m) {
    Index start = -1, ones = 0;
    for (Index k = 0; k < 51; ++k) {
      const double v = x2(m, k);
      REQUIRE((v == 0.0 || v == 1.0));
      if (v == 1.0) {
        if (start < 0) start = k;
        ++ones;
      }
    }
    REQUIRE(ones == 5);
    REQUIRE(x2.row(m).segment(start, 5).sum() == 5.0);
    counts[static_cast<std::size_t>(start)] += 1.0;
    REQUIRE(x1.row(m).minCoeff() >= 0.0);
    REQUIRE(x1.row(m).maxCoeff() < 1.0);
  }
  const double expected_count = 10000.0 / 47.0;
  double chi2 = 0;
  for (double c : counts) chi2 += (c - expected_count) * (c - expected_count) / expected_count;
  // Upper 1% point of the chi-square distribution with 46 degrees of freedom.
  CHECK(chi2 < 71.2);
}

TEST_CASE("wafer distortion matches the analytic gradient") {
  const double h = 2e-6, lambda = 10.0;
  WaferSurface s;
  s.heights = {h};
  s.wavelengths = {lambda};
  double errors[2];
  int idx = 0;
  for (Index cart : {301, 601}) {
    const WaferGrid grid(150.0, cart, 20, 40);
    const Matrixd ipd = grid.distortion(s, 0);
    double worst = 0;
    for (Index i = 0; i < 20; ++i)
      for (Index j = 0; j < 40; ++j) {
        const auto [x, y] = grid.polar_point(i, j);
        const double exact = -(h * std::numbers::pi / lambda) * std::cos(2 * std::numbers::pi * x / lambda);
        worst = std::max(worst, std::abs(ipd(i, j) - exact));
      }
    errors[idx++] = worst / (h * std::numbers::pi / lambda);
  }
  CHECK(errors[1] < 0.05);
  // Second-order accuracy: halving the spacing cuts the error about fourfold.
  CHECK(errors[0] / errors[1] > 3.0);
  CHECK(errors[0] / errors[1] < 5.0);

  const Vectord f = Eigen::ArrayXd::LinSpaced(11, 0.0, 1.0).square();
  const Vectord g = central_difference(f, 0.1);
  for (Index i = 0; i < 11; ++i) CHECK(g(i) == doctest::Approx(2.0 * static_cast<double>(i) / 10.0));
  CHECK_THROWS_AS(central_difference(Vectord::Zero(2), 0.1), ShapeError);
}

TEST_CASE("second-order correction removes pure bow") {
  const WaferGrid grid(150.0, 301, 20, 40);
  WaferSurface bow;
  bow.bow = -0.05;
  for (int axis : {0, 1}) {
    CHECK(grid.distortion(bow, axis).cwiseAbs().maxCoeff() > 1e-6);
    CHECK(grid.residual_distortion(bow, axis).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("polar resampling preserves the mean of the first-layer shape") {
  const WaferGrid grid(150.0, 601, 100, 200);
  WaferSurface w1;
  w1.bow = 0.1;
  const Matrixd polar = grid.height(w1);
  double num = 0, den = 0;
  for (Index i = 0; i < grid.radial(); ++i) {
    const double r = static_cast<double>(i);  // area weight of the ring
    for (Index j = 0; j < grid.angular(); ++j) {
      num += r * polar(i, j);
      den += r;
    }
  }
  const Vectord& nodes = grid.nodes();
  double cart = 0, count = 0;
  for (Index a = 0; a < nodes.size(); ++a)
    for (Index b = 0; b < nodes.size(); ++b) {
      const double x = nodes(a), y = nodes(b);
      if (x * x + y * y > 150.0 * 150.0) continue;
      cart += 0.1 * (0.5 * x * x + y * y) / (150.0 * 150.0);
      count += 1;
    }
  CHECK(std::abs(num / den - cart / count) <= 0.02 * std::abs(cart / count));
}

TEST_CASE("wafer datasets") {
  SimSpec spec = small(SimKind::kWafer, 8);
  const SimData sim = generate(spec);
  CHECK(sim.train.xs[0].shape() == Shape{4, 10, 20});
  CHECK(sim.train.y.shape() == Shape{4, 10, 20});
  CHECK_FALSE(sim.train_truth.has_value());
  CHECK(sim.input_names == std::vector<std::string>{"shape_change"});
  CHECK(squared_norm(sim.train.y) > 0);
  SimSpec y_axis = spec;
  y_axis.wafer_pir_y = true;
  const SimData sy = generate(y_axis);
  CHECK(sy.train.xs[0] == sim.train.xs[0]);
  CHECK_FALSE(sy.train.y == sim.train.y);
}

TEST_CASE("spec validation") {
  SimSpec s = SimSpec::defaults(SimKind::kWaveform);
  s.sigma = -1;
  CHECK_THROWS_AS(generate(s), ConfigError);
  s = SimSpec::defaults(SimKind::kWaveform);
  s.rank_y = 100;
  CHECK_THROWS_AS(generate(s), ConfigError);
  s = SimSpec::defaults(SimKind::kJump);
  s.m_train = 0;
  CHECK_THROWS_AS(generate(s), ConfigError);
}

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mtot/archive.hpp"
#include "mtot/format.hpp"
#include "mtot/manifest.hpp"
#include "mtot/metrics.hpp"
#include "mtot/simgen.hpp"
#include "mtot/tensor_io.hpp"
#include "oracles.hpp"

using namespace mtot;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  TempDir() {
    path = fs::temp_directory_path() / ("mtot_io_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path path;
};

}  // namespace

TEST_CASE("smspe") {
  const Tensord y({2}, {3.0, 4.0});
  CHECK(smspe(y, y) == 0.0);
  CHECK(smspe(y, Tensord::Zero({2})) == 1.0);
  CHECK(smspe(y, Tensord({2}, {3.0, 0.0})) == doctest::Approx(0.64).epsilon(1e-15));
  CHECK_THROWS_AS(smspe(Tensord::Zero({2}), y), ConfigError);
  CHECK_THROWS_AS(smspe(y, Tensord::Zero({3})), ShapeError);

  oracle::Random rng(1);
  const Tensord a = rng.tensor({4, 5}), b = rng.tensor({4, 5});
  const double base = smspe(a, b);
  for (double alpha : {2.0, -0.5, 1024.0}) CHECK(smspe(alpha * a, alpha * b) == base);
  CHECK(smspe(3.7 * a, 3.7 * b) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("mspe and msee") {
  oracle::Random rng(2);
  const Tensord y = rng.tensor({3, 10});
  CHECK(mspe(y, y) == 0.0);
  CHECK(mspe(y, y + Tensord::Constant({3, 10}, 0.5)) == doctest::Approx(0.25));
  CHECK(mspe(Tensord({1, 2}, {0.0, 0.0}), Tensord({1, 2}, {1.0, 3.0})) == 5.0);
  CHECK(mspe(y, rng.tensor({3, 10})) > 0.0);

  const Tensord noise = 0.1 * rng.tensor({3, 10});
  const Tensord observed = y + noise;
  CHECK(msee(observed, noise, y) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(msee(observed, noise, observed) == doctest::Approx(squared_norm(noise) / 30.0));
  CHECK(msee(Tensord({1, 2}, {1.0, 1.0}), Tensord({1, 2}, {1.0, 1.0}), Tensord({1, 2}, {1.0, 3.0})) == 5.0);
}

TEST_CASE("metric reports") {
  MetricReport r{"smspe", {1.0, 2.0, 3.0, 4.0}};
  CHECK(r.mean() == 2.5);
  CHECK(r.sd() == doctest::Approx(std::sqrt(5.0 / 3.0)));
  MetricReport one{"mspe", {0.5}};
  CHECK(one.mean() == 0.5);
  CHECK(std::isnan(one.sd()));
  CHECK(std::isnan(MetricReport{"x", {}}.mean()));

  std::ostringstream os;
  write_report_csv(os, {r, one});
  CHECK(os.str() ==
        "metric,replication,value\n"
        "smspe,0,1\nsmspe,1,2\nsmspe,2,3\nsmspe,3,4\nsmspe,mean,2.5\nsmspe,sd," +
            format_double(std::sqrt(5.0 / 3.0)) +
            "\n"
            "mspe,0,0.5\nmspe,mean,0.5\nmspe,sd,\n");
}

TEST_CASE("number formatting") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("tensor text format") {
  oracle::Random rng(3);
  Tensord t = rng.tensor({2, 3, 4});
  t.values()(0) = 1e-300;
  t.values()(1) = -123456789.123456789;
  std::stringstream ss;
  write_tensor(ss, t);
  const std::string text = ss.str();
  CHECK(text.rfind("TEN1 3 2 3 4\n", 0) == 0);
  const Tensord back = read_tensor(ss);
  CHECK(back == t);

  std::istringstream sci("TEN1 2 1 3\n1e0 -2.5E-1\n3.0e+2");
  const Tensord s = read_tensor(sci);
  CHECK(s.shape() == Shape{1, 3});
  CHECK(s.values()(1) == -0.25);
  CHECK(s.values()(2) == 300.0);

  std::istringstream bad_magic("TEN2 1 1\n0");
  CHECK_THROWS_AS(read_tensor(bad_magic), ShapeError);
  std::istringstream short_values("TEN1 1 3\n1 2");
  CHECK_THROWS_AS(read_tensor(short_values), ShapeError);
  std::istringstream bad_value("TEN1 1 2\n1 x");
  CHECK_THROWS_AS(read_tensor(bad_value), ShapeError);
  std::istringstream bad_extent("TEN1 2 2 0\n");
  CHECK_THROWS_AS(read_tensor(bad_extent), ShapeError);

  Matrixd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  const Tensord mt = matrix_to_tensor(m);
  CHECK(mt.shape() == Shape{2, 3});
  CHECK(mt.values()(1) == 2.0);
  CHECK(tensor_to_matrix(mt) == m);
  CHECK_THROWS_AS(tensor_to_matrix(rng.tensor({2, 2, 2})), ShapeError);

  TempDir dir;
  save_tensor(dir.path / "t.ten", t);
  CHECK(load_tensor(dir.path / "t.ten") == t);
  CHECK_THROWS_AS(load_tensor(dir.path / "missing.ten"), ConfigError);
}

TEST_CASE("model archives round-trip bit for bit") {
  SimSpec spec = SimSpec::defaults(SimKind::kWaveform);
  spec.seed = 4;
  spec.m_train = 30;
  spec.m_test = 5;
  const SimData sim = generate(spec);
  FitConfig cfg;
  cfg.input_ranks = {2, 3};
  cfg.output_rank = 3;
  cfg.max_iter = 20;
  const AnyModel mtot_model = fit(sim.train, cfg);
  const AnyModel pcr_model = pcr_fit(sim.train, 0.95);
  CHECK(model_kind(mtot_model) == "mtot");
  CHECK(model_kind(pcr_model) == "pcr");

  TempDir dir;
  for (const AnyModel* model : {&mtot_model, &pcr_model}) {
    const fs::path path = dir.path / (model_kind(*model) + ".mtar");
    save_model(path, *model);
    const AnyModel back = load_model(path);
    CHECK(model_kind(back) == model_kind(*model));
    const Tensord a = predict_any(*model, sim.test.xs), b = predict_any(back, sim.test.xs);
    CHECK(a == b);
    std::ifstream is(path);
    std::string header, manifest;
    std::getline(is, header);
    std::getline(is, manifest);
    CHECK(header == "MTAR1");
    CHECK(manifest.find("\"kind\":\"" + model_kind(*model) + "\"") != std::string::npos);
  }
  const auto& m1 = std::get<MtotModel<double>>(mtot_model);
  const auto m2 = std::get<MtotModel<double>>(load_model(dir.path / "mtot.mtar"));
  CHECK(m1.loss_trace == m2.loss_trace);
  CHECK(m1.iterations == m2.iterations);
  CHECK(m1.converged == m2.converged);
  for (std::size_t i = 0; i < m1.v.size(); ++i) CHECK(m1.v[i] == m2.v[i]);

  std::istringstream garbage("not an archive\n");
  CHECK_THROWS_AS(read_model(garbage), ShapeError);
  CHECK_THROWS_AS(load_model(dir.path / "missing.mtar"), ConfigError);
}

TEST_CASE("dataset manifests") {
  SimSpec spec = SimSpec::defaults(SimKind::kJump);
  spec.seed = 5;
  spec.m_train = 6;
  spec.m_test = 0;
  const SimData sim = generate(spec);
  TempDir dir;
  const fs::path path =
      write_dataset(dir.path, "train", "jump", 5, spec.sigma, sim.train, sim.input_names, sim.train_truth);
  CHECK(path == dir.path / "train.json");
  CHECK(fs::exists(dir.path / "train_dense.ten"));
  CHECK(fs::exists(dir.path / "train_sparse.ten"));
  CHECK(fs::exists(dir.path / "train_y.ten"));
  CHECK(fs::exists(dir.path / "train_truth.ten"));

  const LoadedDataset loaded = load_dataset(path);
  CHECK(loaded.manifest.kind == "jump");
  CHECK(loaded.manifest.seed == 5);
  CHECK(loaded.manifest.sigma == spec.sigma);
  REQUIRE(loaded.manifest.roles.size() == 4);
  CHECK(loaded.manifest.roles[0].name == "dense");
  CHECK(loaded.manifest.roles[0].kind == "input");
  const Dataset<double> data = loaded.dataset();
  CHECK(data.y == sim.train.y);
  CHECK(data.xs[0] == sim.train.xs[0]);
  CHECK(data.xs[1] == sim.train.xs[1]);
  CHECK(*loaded.truth == *sim.train_truth);

  {
    std::ofstream os(dir.path / "inputs_only.json");
    os << R"({"kind": "jump", "roles": [{"name": "dense", "path": "train_dense.ten", "kind": "input"}]})";
  }
  const LoadedDataset partial = load_dataset(dir.path / "inputs_only.json");
  CHECK_FALSE(partial.output.has_value());
  CHECK_THROWS_AS(partial.dataset(), ConfigError);
  {
    std::ofstream os(dir.path / "broken.json");
    os << "{ not json";
  }
  CHECK_THROWS_AS(load_dataset(dir.path / "broken.json"), ConfigError);
  {
    std::ofstream os(dir.path / "odd_role.json");
    os << R"({"kind": "jump", "roles": [{"name": "dense", "path": "train_dense.ten", "kind": "weights"}]})";
  }
  CHECK_THROWS_AS(load_dataset(dir.path / "odd_role.json"), ConfigError);
}

#include "mtot/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtot/archive.hpp"
#include "mtot/benchmark.hpp"
#include "mtot/format.hpp"
#include "mtot/manifest.hpp"
#include "mtot/metrics.hpp"
#include "mtot/simgen.hpp"
#include "mtot/tensor_io.hpp"
#include "mtot/tuning.hpp"

namespace mtot {

namespace {

// Generator options shared by simulate and benchmark.
struct SimOptions {
  std::string kind;
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  std::optional<Index> m_train, m_test;
  std::optional<int> p;
  std::optional<double> rho;
  std::optional<Index> radial, angular;

  void add(CLI::App* app) {
    app->add_option("--kind", kind, "curve_on_curve | waveform | cone | jump | wafer")->required();
    app->add_option("--seed", seed, "Random seed");
    app->add_option("--m-train", m_train, "Training sample count");
    app->add_option("--m-test", m_test, "Test sample count");
    app->add_option("--p", p, "Number of functional predictors (curve_on_curve)");
    app->add_option("--rho", rho, "Predictor correlation (curve_on_curve)");
    app->add_option("--radial", radial, "Radial grid size (wafer)");
    app->add_option("--angular", angular, "Angular grid size (wafer)");
  }

  SimSpec spec() const {
    SimSpec s = SimSpec::defaults(parse_sim_kind(kind));
    s.seed = seed;
    if (sigma) s.sigma = *sigma;
    if (m_train) s.m_train = *m_train;
    if (m_test) s.m_test = *m_test;
    if (p) s.p = *p;
    if (rho) s.rho = *rho;
    if (radial) s.wafer_radial = *radial;
    if (angular) s.wafer_angular = *angular;
    return s;
  }
};

struct FitOptions {
  std::vector<Index> ranks;
  double tol = 1e-6;
  int max_iter = 100;
  std::uint64_t seed = 0;
  int folds = 5;

  void add(CLI::App* app, bool with_ranks) {
    if (with_ranks)
      app->add_option("--ranks", ranks, "Input ranks followed by the output rank, comma separated")->delimiter(',');
    app->add_option("--tol", tol, "Relative convergence tolerance");
    app->add_option("--max-iter", max_iter, "Sweep cap");
    app->add_option("--seed", seed, "Seed for initialization and fold assignment");
    app->add_option("--folds", folds, "Cross-validation folds");
  }

  FitConfig config() const {
    FitConfig c;
    c.tol = tol;
    c.max_iter = max_iter;
    c.seed = seed;
    if (!ranks.empty()) {
      c.input_ranks.assign(ranks.begin(), ranks.end() - 1);
      c.output_rank = ranks.back();
    }
    return c;
  }

  void check_ranks(const Dataset<double>& data) const {
    if (!ranks.empty() && static_cast<Index>(ranks.size()) != data.inputs() + 1)
      throw ConfigError("--ranks needs " + std::to_string(data.inputs() + 1) + " values (one per input, then the output)");
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path);
  return os;
}

void cmd_simulate(const SimOptions& opt, const std::string& out_dir, std::ostream& out) {
  const SimSpec spec = opt.spec();
  const SimData data = generate(spec);
  const auto kind = to_string(spec.kind);
  auto describe = [&](const char* split, const Dataset<double>& d) {
    out << split << ": y " << shape_string(d.y.shape());
    for (std::size_t j = 0; j < d.xs.size(); ++j) out << ", " << data.input_names[j] << ' ' << shape_string(d.xs[j].shape());
    out << '\n';
  };
  out << "kind=" << kind << " sigma=" << format_double(spec.sigma) << " seed=" << spec.seed << '\n';
  const auto train = write_dataset(out_dir, "train", kind, spec.seed, spec.sigma, data.train, data.input_names, data.train_truth);
  describe("train", data.train);
  out << "wrote " << train.string() << '\n';
  if (data.has_test()) {
    const auto test = write_dataset(out_dir, "test", kind, spec.seed, spec.sigma, data.test, data.input_names, data.test_truth);
    describe("test", data.test);
    out << "wrote " << test.string() << '\n';
  }
}

void cmd_fit(const std::string& data_path, const std::string& method, const FitOptions& opt,
             const std::optional<double>& v, const std::string& model_path, std::ostream& out) {
  const Dataset<double> data = load_dataset(data_path).dataset();
  if (parse_method(method) == Method::kPcr) {
    PcrModel<double> model = v ? pcr_fit(data, *v) : pcr_cv(data, opt.folds, opt.seed).model;
    save_model(model_path, model);
    const double train_loss = squared_norm(Tensord(data.y - pcr_predict<double>(model, data.xs)));
    out << "method=pcr v=" << format_double(model.v) << " gx=" << model.gx() << " gy=" << model.gy()
        << " loss=" << format_double(train_loss) << '\n';
    return;
  }
  opt.check_ranks(data);
  FitConfig cfg = opt.config();
  if (opt.ranks.empty()) {
    const auto report = cross_validate(data, make_rank_grid(data), opt.folds, opt.seed, cfg);
    cfg = report.chosen_config(cfg);
  }
  const auto model = fit(data, cfg);
  save_model(model_path, model);
  out << "method=mtot ranks=";
  for (Index r : cfg.input_ranks) out << r << ',';
  out << cfg.output_rank << " loss=" << format_double(model.loss_trace.back()) << " iterations=" << model.iterations
      << " converged=" << (model.converged ? "true" : "false") << '\n';
}

void cmd_predict(const std::string& model_path, const std::string& data_path, const std::string& out_path,
                 std::ostream& out) {
  const AnyModel model = load_model(model_path);
  const LoadedDataset data = load_dataset(data_path);
  const Tensord pred = predict_any(model, data.inputs);
  save_tensor(out_path, pred);
  out << "prediction " << shape_string(pred.shape()) << " written to " << out_path << '\n';
  if (data.output) out << "smspe=" << format_double(smspe(*data.output, pred)) << '\n';
}

void cmd_cv(const std::string& data_path, const FitOptions& opt, const std::string& out_path, std::ostream& out) {
  const Dataset<double> data = load_dataset(data_path).dataset();
  const auto report = cross_validate(data, make_rank_grid(data), opt.folds, opt.seed, opt.config());
  if (out_path.empty()) {
    write_cv_csv(out, report);
  } else {
    auto os = open_out(out_path);
    write_cv_csv(os, report);
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multiple tensor-on-tensor regression"};
  app.require_subcommand(1);

  SimOptions sim_opt;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Generate a simulated dataset");
  sim_opt.add(simulate);
  simulate->add_option("--sigma", sim_opt.sigma, "Noise standard deviation");
  simulate->add_option("--out", sim_out, "Output directory")->required();

  FitOptions fit_opt;
  std::string fit_data, fit_method = "mtot", fit_out;
  std::optional<double> fit_v;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a dataset manifest");
  fit_cmd->add_option("--data", fit_data, "Training manifest")->required();
  fit_cmd->add_option("--method", fit_method, "mtot | pcr");
  fit_cmd->add_option("--v", fit_v, "PCR retained-variance fraction (cross-validated when omitted)");
  fit_cmd->add_option("--out", fit_out, "Model archive path")->required();
  fit_opt.add(fit_cmd, true);

  std::string pred_model, pred_data, pred_out;
  auto* predict_cmd = app.add_subcommand("predict", "Predict responses for a dataset manifest");
  predict_cmd->add_option("--model", pred_model, "Model archive")->required();
  predict_cmd->add_option("--data", pred_data, "Dataset manifest")->required();
  predict_cmd->add_option("--out", pred_out, "Prediction tensor path")->required();

  FitOptions cv_opt;
  std::string cv_data, cv_out;
  auto* cv_cmd = app.add_subcommand("cv", "Cross-validate the rank grid");
  cv_cmd->add_option("--data", cv_data, "Training manifest")->required();
  cv_cmd->add_option("--out", cv_out, "CSV path (stdout when omitted)");
  cv_opt.add(cv_cmd, false);

  SimOptions bench_sim;
  FitOptions bench_fit;
  std::vector<double> bench_sigmas;
  std::vector<std::string> bench_methods{"mtot", "pcr"};
  int bench_reps = 1;
  std::optional<double> bench_v;
  std::string bench_out, bench_reps_out;
  auto* bench = app.add_subcommand("benchmark", "Replicated simulation study");
  bench_sim.add(bench);
  bench->add_option("--sigma,--sigmas", bench_sigmas, "Noise levels, comma separated")->delimiter(',');
  bench->add_option("--reps", bench_reps, "Replications per noise level");
  bench->add_option("--method", bench_methods, "Methods, comma separated (mtot, pcr)")->delimiter(',');
  bench->add_option("--ranks", bench_fit.ranks, "Fixed MTOT ranks (inputs then output); cross-validated when omitted")
      ->delimiter(',');
  bench->add_option("--tol", bench_fit.tol, "Relative convergence tolerance");
  bench->add_option("--max-iter", bench_fit.max_iter, "Sweep cap");
  bench->add_option("--folds", bench_fit.folds, "Cross-validation folds");
  bench->add_option("--v", bench_v, "Fixed PCR variance fraction");
  bench->add_option("--out", bench_out, "Summary CSV path (stdout when omitted)");
  bench->add_option("--replications", bench_reps_out, "Per-replication CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) {
      cmd_simulate(sim_opt, sim_out, out);
    } else if (*fit_cmd) {
      cmd_fit(fit_data, fit_method, fit_opt, fit_v, fit_out, out);
    } else if (*predict_cmd) {
      cmd_predict(pred_model, pred_data, pred_out, out);
    } else if (*cv_cmd) {
      cmd_cv(cv_data, cv_opt, cv_out, out);
    } else if (*bench) {
      BenchmarkConfig cfg;
      cfg.spec = bench_sim.spec();
      cfg.seed = bench_sim.seed;
      cfg.sigmas = bench_sigmas.empty() ? std::vector<double>{cfg.spec.sigma} : bench_sigmas;
      cfg.reps = bench_reps;
      cfg.methods.clear();
      for (const auto& m : bench_methods) cfg.methods.push_back(parse_method(m));
      cfg.folds = bench_fit.folds;
      cfg.fit = bench_fit.config();
      cfg.fixed_ranks = !bench_fit.ranks.empty();
      cfg.pcr_v = bench_v;
      const auto result = run_benchmark(cfg, &err);
      if (bench_out.empty()) {
        write_summary_csv(out, result);
      } else {
        auto os = open_out(bench_out);
        write_summary_csv(os, result);
      }
      if (!bench_reps_out.empty()) {
        auto os = open_out(bench_reps_out);
        write_replications_csv(os, result);
      }
    }
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace mtot

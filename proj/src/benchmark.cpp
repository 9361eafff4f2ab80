#include "mtot/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "mtot/format.hpp"
#include "mtot/metrics.hpp"
#include "mtot/pcr.hpp"
#include "mtot/tuning.hpp"

namespace mtot {

namespace {

std::string ranks_string(const std::vector<Index>& in, Index out) {
  std::ostringstream s;
  for (std::size_t i = 0; i < in.size(); ++i) s << (i ? " " : "") << in[i];
  s << " | " << out;
  return s.str();
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct Outcome {
  Tensord prediction;
  std::string selection;
};

Outcome run_method(const BenchmarkConfig& cfg, Method method, const SimData& data, std::uint64_t data_seed) {
  const std::uint64_t cv_seed = derive_seed(data_seed, 0xc5);
  if (method == Method::kMtot) {
    FitConfig fc = cfg.fit;
    if (!cfg.fixed_ranks) {
      const RankGrid grid = make_rank_grid(data.train);
      const CvReport report = cross_validate(data.train, grid, cfg.folds, cv_seed, fc);
      fc = report.chosen_config(fc);
    }
    const auto model = fit(data.train, fc);
    return {predict<double>(model, data.test.xs), ranks_string(fc.input_ranks, fc.output_rank)};
  }
  PcrModel<double> model;
  if (cfg.pcr_v) {
    model = pcr_fit(data.train, *cfg.pcr_v);
  } else {
    model = pcr_cv(data.train, cfg.folds, cv_seed).model;
  }
  return {pcr_predict<double>(model, data.test.xs),
          "v=" + format_double(model.v) + " gx=" + std::to_string(model.gx()) + " gy=" + std::to_string(model.gy())};
}

double metric_value(const std::string& metric, const SimData& data, const Tensord& pred) {
  if (metric == "smspe") return smspe(data.test.y, pred);
  if (metric == "log_smspe") return std::log(smspe(data.test.y, pred));
  if (metric == "mspe") return mspe(data.test.y, pred);
  if (metric == "msee") {
    if (!data.test_truth) throw ConfigError("msee needs the noiseless test responses");
    return mspe(*data.test_truth, pred);
  }
  throw ConfigError("unknown metric " + metric);
}

template <typename E>
[[noreturn]] void rethrow_with(const std::string& where, const E& e) {
  throw E(where + ": " + e.what());
}

}  // namespace

std::string to_string(Method m) { return m == Method::kMtot ? "mtot" : "pcr"; }

Method parse_method(std::string_view name) {
  if (name == "mtot") return Method::kMtot;
  if (name == "pcr") return Method::kPcr;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

void BenchmarkConfig::validate() const {
  if (reps < 1) throw ConfigError("replication count must be at least 1");
  if (sigmas.empty()) throw ConfigError("need at least one noise level");
  if (methods.empty()) throw ConfigError("need at least one method");
  if (spec.m_test < 1) throw ConfigError("benchmark needs test samples");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  SimSpec s = spec;
  for (double sigma : sigmas) {
    s.sigma = sigma;
    s.validate();
  }
}

std::vector<double> BenchmarkResult::values(double sigma, Method method, const std::string& metric) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.sigma == sigma && r.method == method && r.metric == metric) out.push_back(r.value);
  return out;
}

std::vector<std::string> metrics_for(SimKind kind) {
  switch (kind) {
    case SimKind::kCurveOnCurve: return {"mspe", "msee"};
    case SimKind::kCone:
    case SimKind::kWafer: return {"log_smspe"};
    default: return {"smspe"};
  }
}

std::uint64_t replication_seed(std::uint64_t seed, int rep) {
  return derive_seed(seed, 0xbe, static_cast<std::uint64_t>(rep));
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::ostream* log) {
  cfg.validate();
  BenchmarkResult result;
  result.kind = cfg.spec.kind;
  const auto metrics = metrics_for(cfg.spec.kind);
  for (double sigma : cfg.sigmas) {
    for (int rep = 0; rep < cfg.reps; ++rep) {
      SimSpec spec = cfg.spec;
      spec.sigma = sigma;
      spec.seed = replication_seed(cfg.seed, rep);
      spec.noise_seed.reset();
      const SimData data = generate(spec);
      for (Method method : cfg.methods) {
        const std::string where =
            "rep " + std::to_string(rep) + ", sigma " + format_double(sigma) + ", method " + to_string(method);
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
          out = run_method(cfg, method, data, spec.seed);
        } catch (const NumericalError& e) {
          rethrow_with(where, e);
        } catch (const ShapeError& e) {
          rethrow_with(where, e);
        } catch (const ConfigError& e) {
          rethrow_with(where, e);
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        for (const auto& metric : metrics) {
          BenchmarkRow row{sigma, rep, method, spec.seed, metric, metric_value(metric, data, out.prediction),
                           out.selection, seconds};
          if (log)
            *log << "rep=" << rep << " sigma=" << format_double(sigma) << " method=" << to_string(method)
                 << " seed=" << spec.seed << " selection=[" << out.selection << "] " << metric << '='
                 << format_double(row.value) << '\n';
          result.rows.push_back(std::move(row));
        }
      }
    }
  }
  return result;
}

void write_summary_csv(std::ostream& os, const BenchmarkResult& result) {
  os << "kind,sigma,method,metric,reps,mean,sd,cell,seconds_mean\n";
  std::vector<double> sigmas;
  std::vector<Method> methods;
  for (const auto& r : result.rows) {
    if (std::find(sigmas.begin(), sigmas.end(), r.sigma) == sigmas.end()) sigmas.push_back(r.sigma);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  for (double sigma : sigmas)
    for (Method method : methods)
      for (const auto& metric : metrics_for(result.kind)) {
        MetricReport rep{metric, result.values(sigma, method, metric)};
        if (rep.values.empty()) continue;
        double secs = 0;
        for (const auto& r : result.rows)
          if (r.sigma == sigma && r.method == method && r.metric == metric) secs += r.seconds;
        secs /= static_cast<double>(rep.values.size());
        const bool single = rep.values.size() < 2;
        const std::string cell = single ? fixed4(rep.mean()) : fixed4(rep.mean()) + " (" + fixed4(rep.sd()) + ")";
        os << to_string(result.kind) << ',' << format_double(sigma) << ',' << to_string(method) << ',' << metric
           << ',' << rep.values.size() << ',' << format_double(rep.mean()) << ','
           << (single ? std::string() : format_double(rep.sd())) << ",\"" << cell << "\"," << fixed4(secs) << '\n';
      }
}

void write_replications_csv(std::ostream& os, const BenchmarkResult& result) {
  os << "kind,sigma,method,rep,seed,metric,value,selection,seconds\n";
  for (const auto& r : result.rows)
    os << to_string(result.kind) << ',' << format_double(r.sigma) << ',' << to_string(r.method) << ',' << r.rep << ','
       << r.data_seed << ',' << r.metric << ',' << format_double(r.value) << ",\"" << r.selection << "\","
       << fixed4(r.seconds) << '\n';
}

}  // namespace mtot

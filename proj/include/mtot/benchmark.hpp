#pragma once

// Replicated simulation studies: for each noise level and replication a
// fresh dataset is generated, each method is tuned by cross-validation (or
// given fixed settings), and test-set errors are collected.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtot/simgen.hpp"
#include "mtot/solver.hpp"

namespace mtot {

enum class Method { kMtot, kPcr };

std::string to_string(Method m);
Method parse_method(std::string_view name);

struct BenchmarkConfig {
  SimSpec spec;  // generator settings; seed and sigma are set per replication
  std::vector<double> sigmas;
  int reps = 1;
  std::uint64_t seed = 0;
  std::vector<Method> methods{Method::kMtot, Method::kPcr};
  int folds = 5;
  FitConfig fit;             // tol, max_iter, seed; ranks only when fixed_ranks
  bool fixed_ranks = false;  // skip rank cross-validation and use fit.input_ranks / fit.output_rank
  std::optional<double> pcr_v;  // skip PCR cross-validation

  void validate() const;
};

struct BenchmarkRow {
  double sigma = 0;
  int rep = 0;
  Method method = Method::kMtot;
  std::uint64_t data_seed = 0;
  std::string metric;
  double value = 0;
  std::string selection;  // chosen ranks or variance fraction
  double seconds = 0;
};

struct BenchmarkResult {
  SimKind kind = SimKind::kWaveform;
  std::vector<BenchmarkRow> rows;

  /// Values of one (sigma, method, metric) cell in replication order.
  std::vector<double> values(double sigma, Method method, const std::string& metric) const;
};

/// Reported metrics: mspe and msee for curve_on_curve, log_smspe for cone and
/// wafer, smspe otherwise.
std::vector<std::string> metrics_for(SimKind kind);

/// Seed of replication `rep`; shared by all noise levels and methods.
std::uint64_t replication_seed(std::uint64_t seed, int rep);

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, std::ostream* log = nullptr);

/// One row per (sigma, method, metric): kind, sigma, method, metric, reps,
/// mean, sd, cell ("mean (sd)"), seconds_mean. sd and its part of the cell
/// are empty for a single replication.
void write_summary_csv(std::ostream& os, const BenchmarkResult& result);
/// One row per replication and metric, including the data seed and selection.
void write_replications_csv(std::ostream& os, const BenchmarkResult& result);

}  // namespace mtot

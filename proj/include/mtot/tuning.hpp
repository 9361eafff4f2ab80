#pragma once

// Rank selection for the MTOT solver: candidate ladders built from the
// numerical ranks of the mode-1 unfoldings, searched by k-fold
// cross-validation on held-out squared error.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "mtot/decomposition.hpp"
#include "mtot/rng.hpp"
#include "mtot/solver.hpp"

namespace mtot {

/// {1, ..., ceil(R/4), ceil(R/2), R}: repeated halving from R, deduplicated,
/// ascending. R = 0 (a zero matrix) falls back to {1}.
std::vector<Index> build_grid(Index rank);

/// Seeded assignment of `samples` items to `folds` folds whose sizes differ by at most one.
std::vector<int> fold_assignment(Index samples, int folds, std::uint64_t seed);

struct RankGrid {
  std::vector<std::vector<Index>> inputs;  // candidate ranks per input
  std::vector<Index> output;
  std::vector<Index> input_source_ranks;
  Index output_source_rank = 0;
};

template <typename Scalar>
RankGrid make_rank_grid(const Dataset<Scalar>& data) {
  data.validate();
  RankGrid grid;
  for (const auto& x : data.xs) {
    const Index r = numerical_rank(unfold(x, 0));
    grid.input_source_ranks.push_back(r);
    grid.inputs.push_back(build_grid(r));
  }
  grid.output_source_rank = numerical_rank(unfold(data.y, 0));
  grid.output = build_grid(grid.output_source_rank);
  return grid;
}

struct CvEntry {
  std::vector<Index> input_ranks;
  Index output_rank = 0;
  double mean_rss = std::numeric_limits<double>::quiet_NaN();
  int folds_used = 0;
  Index parameters = 0;
  bool skipped = false;
  std::string reason;
};

struct CvReport {
  std::vector<CvEntry> entries;
  std::vector<Index> chosen_input_ranks;
  Index chosen_output_rank = 0;
  double chosen_rss = 0;
  std::uint64_t seed = 0;
  int folds = 0;

  FitConfig chosen_config(FitConfig base) const {
    base.input_ranks = chosen_input_ranks;
    base.output_rank = chosen_output_rank;
    return base;
  }
};

/// Writes one row per grid tuple: rank_x1..rank_xp, rank_y, mean_rss, folds_used, parameters, status.
void write_cv_csv(std::ostream& os, const CvReport& report);

namespace detail {

inline bool cv_better(const CvEntry& a, const CvEntry& b) {
  if (a.mean_rss != b.mean_rss) return a.mean_rss < b.mean_rss;
  if (a.parameters != b.parameters) return a.parameters < b.parameters;
  if (a.input_ranks != b.input_ranks) return a.input_ranks < b.input_ranks;
  return a.output_rank < b.output_rank;
}

}  // namespace detail

/// Evaluates every tuple of the grid by `folds`-fold cross-validation. Held-out
/// squared residuals are summed over all folds and divided by the total
/// held-out entry count. Ties go to fewer parameters, then the
/// lexicographically smallest tuple.
template <typename Scalar>
CvReport cross_validate(const Dataset<Scalar>& data, const RankGrid& grid, int folds, std::uint64_t seed,
                        const FitConfig& base = {}) {
  data.validate();
  if (folds < 2) throw ConfigError("cross-validation needs at least two folds");
  if (data.samples() < folds) throw ConfigError("fewer samples than folds");
  if (grid.inputs.size() != data.xs.size()) throw ConfigError("rank grid does not match the number of inputs");

  CvReport report;
  report.seed = seed;
  report.folds = folds;

  // Enumerate tuples, last input varying fastest and the output rank last.
  std::vector<std::vector<Index>> tuples{{}};
  for (const auto& cand : grid.inputs) {
    std::vector<std::vector<Index>> next;
    for (const auto& t : tuples)
      for (Index r : cand) {
        auto e = t;
        e.push_back(r);
        next.push_back(std::move(e));
      }
    tuples = std::move(next);
  }
  for (const auto& t : tuples)
    for (Index q : grid.output) {
      CvEntry e;
      e.input_ranks = t;
      e.output_rank = q;
      FitConfig cfg = base;
      cfg.input_ranks = t;
      cfg.output_rank = q;
      try {
        validate_config(data, cfg);
        e.parameters = parameter_count(data, t, q);
      } catch (const ConfigError& err) {
        e.skipped = true;
        e.reason = err.what();
      }
      report.entries.push_back(std::move(e));
    }

  const auto assignment = fold_assignment(data.samples(), folds, seed);
  std::vector<double> rss(report.entries.size(), 0.0);
  std::vector<double> count(report.entries.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<Index> train, test;
    for (Index m = 0; m < data.samples(); ++m) (assignment[static_cast<std::size_t>(m)] == f ? test : train).push_back(m);
    const Dataset<Scalar> tr = data.subset(train);
    const Dataset<Scalar> te = data.subset(test);
    const BasisCache<Scalar> cache = compute_basis_cache(tr, base.input_basis);
    for (std::size_t e = 0; e < report.entries.size(); ++e) {
      auto& entry = report.entries[e];
      if (entry.skipped) continue;
      FitConfig cfg = base;
      cfg.input_ranks = entry.input_ranks;
      cfg.output_rank = entry.output_rank;
      try {
        const auto model = fit(tr, cfg, &cache);
        const Tensor<Scalar> pred = predict<Scalar>(model, te.xs);
        rss[e] += static_cast<double>(squared_norm(Tensor<Scalar>(te.y - pred)));
        count[e] += static_cast<double>(te.y.size());
        ++entry.folds_used;
      } catch (const NumericalError& err) {
        entry.skipped = true;
        entry.reason = err.what();
      }
    }
  }

  const CvEntry* best = nullptr;
  for (std::size_t e = 0; e < report.entries.size(); ++e) {
    auto& entry = report.entries[e];
    if (entry.skipped || count[e] == 0) continue;
    entry.mean_rss = rss[e] / count[e];
    if (best == nullptr || detail::cv_better(entry, *best)) best = &entry;
  }
  if (best == nullptr) throw ConfigError("cross-validation: every rank tuple was infeasible");
  report.chosen_input_ranks = best->input_ranks;
  report.chosen_output_rank = best->output_rank;
  report.chosen_rss = best->mean_rss;
  return report;
}

extern template CvReport cross_validate<double>(const Dataset<double>&, const RankGrid&, int, std::uint64_t,
                                                const FitConfig&);
extern template RankGrid make_rank_grid<double>(const Dataset<double>&);

}  // namespace mtot

#include "mtot/tuning.hpp"

#include <numeric>

#include "mtot/format.hpp"

namespace mtot {

std::vector<Index> build_grid(Index rank) {
  if (rank < 0) throw ConfigError("build_grid: negative rank");
  std::vector<Index> grid{1};
  for (Index div = 1; div <= rank; div *= 2) grid.push_back((rank + div - 1) / div);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::vector<int> fold_assignment(Index samples, int folds, std::uint64_t seed) {
  if (folds < 1) throw ConfigError("fold_assignment: need at least one fold");
  std::vector<Index> order(static_cast<std::size_t>(samples));
  std::iota(order.begin(), order.end(), Index{0});
  // Fisher-Yates with the portable integer draw.
  Rng rng(derive_seed(seed, 0xf01d));
  for (Index i = samples - 1; i > 0; --i)
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
  std::vector<int> fold(static_cast<std::size_t>(samples));
  for (Index k = 0; k < samples; ++k) fold[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = static_cast<int>(k % folds);
  return fold;
}

void write_cv_csv(std::ostream& os, const CvReport& report) {
  const std::size_t p = report.entries.empty() ? 0 : report.entries.front().input_ranks.size();
  for (std::size_t j = 0; j < p; ++j) os << "rank_x" << j + 1 << ',';
  os << "rank_y,mean_rss,folds_used,parameters,status\n";
  for (const auto& e : report.entries) {
    for (Index r : e.input_ranks) os << r << ',';
    os << e.output_rank << ',' << (e.skipped ? std::string() : format_double(e.mean_rss)) << ',' << e.folds_used << ','
       << e.parameters << ',';
    const bool chosen = !e.skipped && e.input_ranks == report.chosen_input_ranks && e.output_rank == report.chosen_output_rank;
    os << (e.skipped ? "skipped: " + e.reason : chosen ? std::string("chosen") : std::string("ok")) << '\n';
  }
}

}  // namespace mtot

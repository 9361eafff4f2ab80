#pragma once

// Dataset manifests: a JSON file naming the tensors of one dataset split,
//
//   {"kind": "jump", "seed": 7, "sigma": 0.1,
//    "roles": [{"name": "dense", "path": "train_dense.ten", "kind": "input"}, ...]}
//
// Paths are relative to the manifest's directory. Role kinds are input,
// output and truth (the noiseless response, when known).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtot/solver.hpp"

namespace mtot {

struct Role {
  std::string name;
  std::string path;
  std::string kind;
};

struct DatasetManifest {
  std::string kind;
  std::uint64_t seed = 0;
  double sigma = 0;
  std::vector<Role> roles;
};

struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Tensord> inputs;
  std::optional<Tensord> output;
  std::optional<Tensord> truth;

  /// Requires an output role.
  Dataset<double> dataset() const;
};

/// Writes `<dir>/<stem>.json` and one .ten file per tensor, named `<stem>_<role>.ten`.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const std::string& stem, const std::string& kind,
                                    std::uint64_t seed, double sigma, const Dataset<double>& data,
                                    const std::vector<std::string>& input_names, const std::optional<Tensord>& truth);

LoadedDataset load_dataset(const std::filesystem::path& manifest);

}  // namespace mtot

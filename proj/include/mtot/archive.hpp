#pragma once

// Single-file model archives. Layout:
//
//   MTAR1
//   <one-line JSON manifest with a "kind" tag: "mtot" or "pcr">
//   @block <name>
//   <tensor in .ten format>
//   ...
//
// Values are written with 17 significant digits, so a loaded model predicts
// bit-identically to the one that was saved.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>

#include "mtot/pcr.hpp"
#include "mtot/solver.hpp"

namespace mtot {

using AnyModel = std::variant<MtotModel<double>, PcrModel<double>>;

void write_model(std::ostream& os, const MtotModel<double>& model);
void write_model(std::ostream& os, const PcrModel<double>& model);
AnyModel read_model(std::istream& is);

void save_model(const std::filesystem::path& path, const AnyModel& model);
AnyModel load_model(const std::filesystem::path& path);

std::string model_kind(const AnyModel& model);
Tensord predict_any(const AnyModel& model, std::span<const Tensord> xs);

}  // namespace mtot

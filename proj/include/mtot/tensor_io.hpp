#pragma once

// Plain-text tensor files:
//
//   TEN1 <order> <I_1> ... <I_n>
//   <values in storage order, last mode fastest>

#include <filesystem>
#include <iosfwd>

#include "mtot/tensor.hpp"

namespace mtot {

void write_tensor(std::ostream& os, const Tensord& t);
/// Reads one tensor. Throws ShapeError on a malformed header or short data.
Tensord read_tensor(std::istream& is);

void save_tensor(const std::filesystem::path& path, const Tensord& t);
Tensord load_tensor(const std::filesystem::path& path);

/// A matrix as a [rows, cols] tensor in row-major storage, and back.
Tensord matrix_to_tensor(const Matrixd& m);
Matrixd tensor_to_matrix(const Tensord& t);

}  // namespace mtot

#pragma once

#include <string>

namespace mtot {

/// Shortest-safe text form of a double: 17 significant digits, so that
/// parsing it back yields the same value.
std::string format_double(double v);

}  // namespace mtot

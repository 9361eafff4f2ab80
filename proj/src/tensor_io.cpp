#include "mtot/tensor_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "mtot/format.hpp"

namespace mtot {

namespace {

double parse_double(const std::string& token) {
  double v = 0;
  const char* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ShapeError("tensor file: bad value '" + token + "'");
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const Tensord& t) {
  os << "TEN1 " << t.order();
  for (Index e : t.shape()) os << ' ' << e;
  os << '\n';
  for (Index i = 0; i < t.size(); ++i) os << format_double(t.data()[i]) << '\n';
}

Tensord read_tensor(std::istream& is) {
  std::string magic;
  Index order = 0;
  if (!(is >> magic) || magic != "TEN1") throw ShapeError("tensor file: missing TEN1 header");
  if (!(is >> order) || order < 1) throw ShapeError("tensor file: bad order");
  Shape shape(static_cast<std::size_t>(order));
  for (auto& e : shape)
    if (!(is >> e) || e < 1) throw ShapeError("tensor file: bad extent");
  Tensord t(shape);
  std::string token;
  for (Index i = 0; i < t.size(); ++i) {
    if (!(is >> token)) throw ShapeError("tensor file: expected " + std::to_string(t.size()) + " values");
    t.data()[i] = parse_double(token);
  }
  return t;
}

void save_tensor(const std::filesystem::path& path, const Tensord& t) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write " + path.string());
  write_tensor(os, t);
  if (!os) throw ConfigError("write failed: " + path.string());
}

Tensord load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  return read_tensor(is);
}

Tensord matrix_to_tensor(const Matrixd& m) {
  Tensord t({m.rows(), m.cols()});
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) t.data()[r * m.cols() + c] = m(r, c);
  return t;
}

Matrixd tensor_to_matrix(const Tensord& t) {
  if (t.order() != 2) throw ShapeError("tensor_to_matrix: expected an order-2 tensor");
  Matrixd m(t.extent(0), t.extent(1));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = t.data()[r * m.cols() + c];
  return m;
}

}  // namespace mtot

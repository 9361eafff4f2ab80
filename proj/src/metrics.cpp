#include "mtot/metrics.hpp"

#include <cmath>
#include <limits>

#include "mtot/format.hpp"
#include "mtot/multilinear.hpp"

namespace mtot {

namespace {

void check_same(const Tensord& a, const Tensord& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                     " differ");
}

}  // namespace

double smspe(const Tensord& y, const Tensord& y_hat) {
  check_same(y, y_hat, "smspe");
  const double denom = squared_norm(y);
  if (!(denom > 0)) throw ConfigError("smspe: reference tensor is zero");
  return squared_norm(Tensord(y - y_hat)) / denom;
}

double mspe(const Tensord& y, const Tensord& y_hat) {
  check_same(y, y_hat, "mspe");
  return squared_norm(Tensord(y - y_hat)) / static_cast<double>(y.size());
}

double msee(const Tensord& y, const Tensord& noise, const Tensord& y_hat) {
  check_same(y, noise, "msee");
  return mspe(Tensord(y - noise), y_hat);
}

double MetricReport::mean() const {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double MetricReport::sd() const {
  if (values.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean();
  double s = 0;
  for (double v : values) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(values.size() - 1));
}

void write_report_csv(std::ostream& os, const std::vector<MetricReport>& reports) {
  os << "metric,replication,value\n";
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < r.values.size(); ++i) os << r.metric << ',' << i << ',' << format_double(r.values[i]) << '\n';
    os << r.metric << ",mean," << format_double(r.mean()) << '\n';
    os << r.metric << ",sd," << (r.values.size() < 2 ? std::string() : format_double(r.sd())) << '\n';
  }
}

}  // namespace mtot

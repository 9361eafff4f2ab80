#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mtot/tensor.hpp"

namespace mtot {

/// ||y - y_hat||^2 / ||y||^2.
double smspe(const Tensord& y, const Tensord& y_hat);

/// Mean over samples of the mean squared error over each sample's grid
/// points, i.e. the mean squared entry error. Sample mode first.
double mspe(const Tensord& y, const Tensord& y_hat);

/// Error against the noiseless truth y - noise. Equivalent to mspe(truth, y_hat).
double msee(const Tensord& y, const Tensord& noise, const Tensord& y_hat);

struct MetricReport {
  std::string metric;
  std::vector<double> values;

  double mean() const;
  /// Sample standard deviation (n - 1 denominator); NaN for fewer than two values.
  double sd() const;
};

/// Columns metric, replication, value, then summary rows "mean" and "sd".
void write_report_csv(std::ostream& os, const std::vector<MetricReport>& reports);

}  // namespace mtot

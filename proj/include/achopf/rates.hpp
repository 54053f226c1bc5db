#pragma once

#include <string>
#include <vector>

namespace achopf {

struct RateFit {
  std::vector<double> xs;
  std::vector<double> errs;
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
  bool monotone = true;      // errors shrink as x shrinks
  bool converging = true;    // slope clearly positive
  std::vector<std::string> warnings;
};

// Least squares on (log x, log err). Non-positive errors are dropped with a
// warning; fewer than three survivors throws InvalidInput.
RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& errs);

// max/min over a list of positive values; infinity if any is non-positive.
double spread_ratio(const std::vector<double>& v);
double median(std::vector<double> v);

}  // namespace achopf

#include "achopf/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "achopf/model.hpp"

namespace achopf {

RateFit fit_rate(const std::vector<double>& xs, const std::vector<double>& errs) {
  if (xs.size() != errs.size()) throw InvalidInput("fit_rate: x and error series differ in length");
  RateFit f;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(errs[i] > 0) || !(xs[i] > 0) || !std::isfinite(errs[i])) {
      f.warnings.push_back("dropped point " + std::to_string(i) + " (non-positive value)");
      continue;
    }
    f.xs.push_back(xs[i]);
    f.errs.push_back(errs[i]);
  }
  const size_t n = f.xs.size();
  if (n < 3) throw InvalidInput("fit_rate: fewer than 3 positive points");

  std::vector<double> lx(n), ly(n);
  for (size_t i = 0; i < n; ++i) {
    lx[i] = std::log(f.xs[i]);
    ly[i] = std::log(f.errs[i]);
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx == 0) throw InvalidInput("fit_rate: all x values coincide");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0;
  for (size_t i = 0; i < n; ++i) {
    const double r = ly[i] - (f.intercept + f.slope * lx[i]);
    ssr += r * r;
  }
  // A perfectly flat series has nothing to explain.
  f.r_squared = syy > 0 ? std::clamp(1.0 - ssr / syy, 0.0, 1.0) : (ssr == 0 ? 1.0 : 0.0);

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return f.xs[a] < f.xs[b]; });
  for (size_t i = 1; i < n; ++i)
    if (f.errs[order[i]] < f.errs[order[i - 1]]) f.monotone = false;
  if (!f.monotone) f.warnings.push_back("error sequence is not monotone in x");
  f.converging = f.slope > 0.5;
  if (!f.converging) f.warnings.push_back("non-convergent: fitted slope " + std::to_string(f.slope));
  return f;
}

double spread_ratio(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double lo = v[0], hi = v[0];
  for (double x : v) {
    if (!(x > 0) || !std::isfinite(x)) return std::numeric_limits<double>::infinity();
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  return hi / lo;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace achopf

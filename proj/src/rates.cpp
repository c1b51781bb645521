#include "adlim/rates.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "adlim/errors.hpp"

namespace adlim {

RateFit fit_rate(const Vec& eps, const Vec& err) {
  if (eps.size() != err.size()) {
    throw ConfigError("rate fit needs matching eps/error lists");
  }
  const double floor =
      10.0 * std::numeric_limits<double>::epsilon() *
      (err.size() ? err.cwiseAbs().maxCoeff() : 0.0);

  std::vector<double> lx, ly;
  RateFit fit;
  for (Eigen::Index i = 0; i < eps.size(); ++i) {
    if (eps[i] <= 0.0) throw ConfigError("rate fit needs positive eps values");
    if (err[i] <= floor) {
      ++fit.floored;
      continue;
    }
    lx.push_back(std::log(eps[i]));
    ly.push_back(std::log(err[i]));
  }
  fit.used = static_cast<int>(lx.size());
  if (fit.used < 3) {
    throw NumericalError(
        "rate fit has fewer than three points above the roundoff floor (" +
        std::to_string(fit.used) + " usable, " + std::to_string(fit.floored) +
        " floored)");
  }

  double mx = 0.0, my = 0.0;
  for (int i = 0; i < fit.used; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= fit.used;
  my /= fit.used;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < fit.used; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (sxx == 0.0) throw ConfigError("rate fit needs distinct eps values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (int i = 0; i < fit.used; ++i) {
    double d = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss += d * d;
  }
  fit.residual = std::sqrt(ss / fit.used);
  return fit;
}

}  // namespace adlim

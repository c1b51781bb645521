// Least-squares convergence-rate fits on log-log data.

#pragma once

#include <Eigen/Dense>

#include "adlim/grid.hpp"

namespace adlim {

struct RateFit {
  double slope = 0.0;      // fitted order: err ~ C * eps^slope
  double intercept = 0.0;  // log C
  double residual = 0.0;   // RMS deviation of log err around the fit
  int used = 0;            // points entering the fit
  int floored = 0;         // points dropped for sitting at roundoff level
};

// Fits log(err) = intercept + slope * log(eps).  Points with err at the
// roundoff floor (err <= 10 * machine-eps * max err, or exactly zero) are
// excluded: they would flatten a genuine rate.  Throws NumericalError when
// fewer than three usable points remain.
RateFit fit_rate(const Vec& eps, const Vec& err);

}  // namespace adlim

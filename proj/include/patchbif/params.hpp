#pragma once
// Core parameter pair (alpha, b) of the annular-patch problem.

#include <cmath>
#include <stdexcept>
#include <string>

namespace patchbif {

// Interaction exponent alpha in (0,2) and inner radius b in (0,1].
// b = 1 is admitted only where a limit value is being evaluated; b = 0 is
// excluded (the annulus degenerates).
struct Params {
  double alpha;
  double b;

  Params(double alpha_, double b_) : alpha(alpha_), b(b_) {
    if (!std::isfinite(alpha) || !(alpha > 0.0 && alpha < 2.0)) {
      throw std::domain_error("Params: alpha must lie in (0,2), got " +
                              std::to_string(alpha_));
    }
    if (!std::isfinite(b) || !(b > 0.0 && b <= 1.0)) {
      throw std::domain_error("Params: b must lie in (0,1], got " +
                              std::to_string(b_));
    }
  }
};

}  // namespace patchbif

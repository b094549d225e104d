#pragma once

#include <cmath>
#include <sstream>

#include "twistlab/ring/jacobian.hpp"

namespace twistlab::ring {

struct FiniteThresholdOptions {
  WeightMode mode = WeightMode::fractional;
  double r_tol = 1e-12;
  double scan_step = 1e-3;
};

// Finite-ring bifurcation point r_0^{.,M}(q): attractive is the first r where
// the leading eigenvalue at the twisted state turns non-negative, repulsive the
// first r where every eigenvalue of the repulsive model is negative.
inline double finite_threshold(long q, long M, ModelSign kind, const FiniteThresholdOptions& opt = {}) {
  require(q >= 1, "twist number q must be positive");
  require(M >= 20 * q, "M must be at least 20 q to resolve the twisted state");
  if (kind == ModelSign::repulsive && q == 1) {
    fail(ErrorKind::no_bifurcation, "for q=1 there is no bifurcation in the repulsive model");
  }
  auto leading = [&](double r) {
    SystemSpec spec{Params{r}, kind, Orders::pairwise_only()};
    RingSystem sys(spec, build_weights(M, r, opt.mode));
    return leading_twisted_eigenvalue(sys, q);
  };
  // pred(r) is false below the threshold and true at or above it.
  auto pred = [&](double r) {
    double v = leading(r);
    return kind == ModelSign::attractive ? v >= 0.0 : v < 0.0;
  };
  double prev = opt.scan_step;
  if (pred(prev)) fail(ErrorKind::no_threshold, "threshold lies below the first scan point");
  for (double r = 2.0 * opt.scan_step; r <= 0.5 + 1e-15; r += opt.scan_step) {
    double rr = std::min(r, 0.5);
    if (pred(rr)) {
      double lo = prev, hi = rr;
      while (hi - lo > opt.r_tol) {
        double mid = 0.5 * (lo + hi);
        (pred(mid) ? hi : lo) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = rr;
  }
  fail(ErrorKind::no_threshold, "no sign change of the leading eigenvalue on (0, 1/2]");
}

}  // namespace twistlab::ring

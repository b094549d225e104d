#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "twistlab/ring/rhs.hpp"

namespace twistlab::ring {

enum class Stepper { dopri54, rk4 };
enum class StopReason { t_end, equilibrium };

inline const char* to_string(StopReason s) { return s == StopReason::t_end ? "t_end" : "equilibrium"; }

struct IntegrateOptions {
  double t_end = 1e3;
  double tol = 1e-9;              // absolute and relative tolerance
  double equilibrium_tol = 1e-10;  // sup norm of the right-hand side
  Stepper stepper = Stepper::dopri54;
  double h0 = 0.0;                // initial (dopri54) or fixed (rk4) step; 0 picks a default
  double h_min = 1e-12;
  long max_steps = 50'000'000;
  double sample_every = 0.0;      // trajectory sampling interval; 0 disables
};

struct TrajectorySample {
  double t;
  Eigen::VectorXd theta;
};

struct IntegrateResult {
  PhaseVector theta;
  double t = 0.0;
  StopReason stop = StopReason::t_end;
  double residual = 0.0;
  long steps = 0;
  long rejected = 0;
  long rhs_evals = 0;
  std::vector<TrajectorySample> samples;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
struct Dopri {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;
};

}  // namespace detail

inline IntegrateResult integrate(const PhaseVector& theta0, const RingSystem& sys, const IntegrateOptions& opt) {
  require(opt.tol > 0.0, "integration tolerance must be positive");
  require(opt.t_end >= 0.0, "t_end must be non-negative");
  require(theta0.size() == sys.size(), "phase vector size does not match the system");

  IntegrateResult res;
  Eigen::VectorXd y = theta0.values();
  auto f = [&](const Eigen::VectorXd& v) {
    ++res.rhs_evals;
    return sys.rhs(v);
  };
  auto pin = [](Eigen::VectorXd& v) {
    v.array() -= v[0];
    v[0] = 0.0;
  };

  double t = 0.0;
  double next_sample = 0.0;
  auto sample = [&] {
    if (opt.sample_every > 0.0 && t >= next_sample) {
      res.samples.push_back({t, y});
      next_sample += opt.sample_every;
    }
  };

  Eigen::VectorXd k1 = f(y);
  auto finish = [&](StopReason why) {
    res.theta = PhaseVector(y);
    res.t = t;
    res.stop = why;
    res.residual = k1.lpNorm<Eigen::Infinity>();
    if (opt.sample_every > 0.0 && (res.samples.empty() || res.samples.back().t < t)) res.samples.push_back({t, y});
    return res;
  };

  sample();
  if (k1.lpNorm<Eigen::Infinity>() < opt.equilibrium_tol) return finish(StopReason::equilibrium);

  if (opt.stepper == Stepper::rk4) {
    const double h = opt.h0 > 0.0 ? opt.h0 : 0.1;
    while (t < opt.t_end && res.steps < opt.max_steps) {
      double hh = std::min(h, opt.t_end - t);
      Eigen::VectorXd k2 = f(y + 0.5 * hh * k1);
      Eigen::VectorXd k3 = f(y + 0.5 * hh * k2);
      Eigen::VectorXd k4 = f(y + hh * k3);
      y += hh / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      pin(y);
      t += hh;
      ++res.steps;
      k1 = f(y);
      sample();
      if (k1.lpNorm<Eigen::Infinity>() < opt.equilibrium_tol) return finish(StopReason::equilibrium);
    }
    return finish(StopReason::t_end);
  }

  using D = detail::Dopri;
  double h = opt.h0 > 0.0 ? opt.h0 : std::min(0.1, opt.t_end > 0.0 ? opt.t_end : 0.1);
  Eigen::VectorXd k2, k3, k4, k5, k6, k7, y5, err;
  while (t < opt.t_end) {
    if (res.steps + res.rejected >= opt.max_steps) {
      fail(ErrorKind::non_convergence, "integration exceeded the step budget");
    }
    h = std::min(h, opt.t_end - t);
    k2 = f(y + h * D::a21 * k1);
    k3 = f(y + h * (D::a31 * k1 + D::a32 * k2));
    k4 = f(y + h * (D::a41 * k1 + D::a42 * k2 + D::a43 * k3));
    k5 = f(y + h * (D::a51 * k1 + D::a52 * k2 + D::a53 * k3 + D::a54 * k4));
    k6 = f(y + h * (D::a61 * k1 + D::a62 * k2 + D::a63 * k3 + D::a64 * k4 + D::a65 * k5));
    y5 = y + h * (D::b1 * k1 + D::b3 * k3 + D::b4 * k4 + D::b5 * k5 + D::b6 * k6);
    k7 = f(y5);
    err = h * (D::e1 * k1 + D::e3 * k3 + D::e4 * k4 + D::e5 * k5 + D::e6 * k6 + D::e7 * k7);
    double en = 0.0;
    for (long i = 0; i < y.size(); ++i) {
      double sc = opt.tol + opt.tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      en = std::max(en, std::abs(err[i]) / sc);
    }
    if (en <= 1.0) {
      t += h;
      y = y5;
      pin(y);
      k1 = k7;
      ++res.steps;
      sample();
      if (k1.lpNorm<Eigen::Infinity>() < opt.equilibrium_tol) return finish(StopReason::equilibrium);
      double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
      h *= std::clamp(fac, 0.2, 5.0);
    } else {
      ++res.rejected;
      h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
      if (h < opt.h_min) {
        std::ostringstream os;
        os << "step size underflow at t=" << t;
        fail(ErrorKind::stiffness, os.str());
      }
    }
  }
  return finish(StopReason::t_end);
}

}  // namespace twistlab::ring

#pragma once

#include <cmath>
#include <concepts>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>

#include <boost/math/tools/roots.hpp>

#include "twistlab/errors.hpp"

namespace twistlab {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Denominators below this magnitude are treated as exactly zero.
inline constexpr double degeneracy_tol = 1e-12;

enum class ModelSign { attractive = 1, repulsive = -1 };

inline double sign_factor(ModelSign s) { return s == ModelSign::attractive ? 1.0 : -1.0; }

struct Strengths {
  double lambda = 0.0;
  double mu = 0.0;
};

class Params {
 public:
  Params(double r, double lambda = 0.0, double mu = 0.0) : r_(r), lambda_(lambda), mu_(mu) {
    if (!(r > 0.0 && r <= 0.5)) {
      std::ostringstream os;
      os << "coupling range r must lie in (0, 1/2], got " << r;
      fail(ErrorKind::argument, os.str());
    }
    require(std::isfinite(lambda) && std::isfinite(mu), "lambda and mu must be finite");
  }

  double r() const { return r_; }
  double lambda() const { return lambda_; }
  double mu() const { return mu_; }
  Strengths strengths() const { return {lambda_, mu_}; }

  Params with_r(double r) const { return {r, lambda_, mu_}; }
  Params with_lambda(double lambda) const { return {r_, lambda, mu_}; }

  bool operator==(const Params&) const = default;

 private:
  double r_;
  double lambda_;
  double mu_;
};

// Anything that provides Fourier coefficients of an even coupling kernel and
// their derivative with respect to the range r.
template <class K>
concept FourierKernel = requires(const K& w, long k) {
  { w.coefficient(k) } -> std::convertible_to<double>;
  { w.coefficient_dr(k) } -> std::convertible_to<double>;
};

inline int w_kernel(double r, double x) {
  double y = x - std::floor(x);
  return std::min(y, 1.0 - y) <= r ? 1 : 0;
}

inline double w_hat(double r, long k) {
  if (k == 0) return 4.0 * r;
  double kk = static_cast<double>(k);
  return 2.0 * std::sin(two_pi * kk * r) / (pi * kk);
}

inline double w_hat_dr(double r, long k) {
  return 4.0 * std::cos(two_pi * static_cast<double>(k) * r);
}

struct IndicatorKernel {
  double r;
  double coefficient(long k) const { return w_hat(r, k); }
  double coefficient_dr(long k) const { return w_hat_dr(r, k); }
};

// Appendix coefficient algebra, generic in the kernel.

template <FourierKernel K>
double c1(const K& w, long q, long k, Strengths s = {}) {
  double wq = w.coefficient(q);
  return 0.25 * (w.coefficient(q - k) + w.coefficient(q + k) - 2.0 * wq -
                 (4.0 * s.lambda + 2.0 * s.mu) * wq);
}

template <FourierKernel K>
double c2(const K& w, long q, long k, Strengths s = {}) {
  auto W = [&](long j) { return w.coefficient(j); };
  return (-W(q - 2 * k) + 2.0 * W(q - k) - 2.0 * W(q + k) + W(q + 2 * k) -
          2.0 * s.lambda * W(q - k) + 2.0 * s.lambda * W(q + k)) /
         8.0;
}

template <FourierKernel K>
double c3(const K& w, long q, long m, long k) {
  auto W = [&](long j) { return w.coefficient(j); };
  return (-W(q - m) + W(q - m + k) + W(q - k) - W(q + k) - W(q + m - k) + W(q + m)) / 8.0;
}

template <FourierKernel K>
double c4(const K& w, long q, long m, long k) {
  auto W = [&](long j) { return w.coefficient(j); };
  return (-W(q - m - k) + W(q - m) + W(q - k) - W(q + k) - W(q + m) + W(q + m + k)) / 8.0;
}

template <FourierKernel K>
double c5(const K& w, long q, long k, Strengths s = {}) {
  auto W = [&](long j) { return w.coefficient(j); };
  double l = s.lambda, u = s.mu;
  return (W(q - 2 * k) - 4.0 * W(q - k) + 6.0 * W(q) - 4.0 * W(q + k) + W(q + 2 * k) +
          4.0 * l * W(q - k) + 32.0 * l * W(q) + 4.0 * l * W(q + k) + 2.0 * u * W(q - k) +
          14.0 * u * W(q) + 2.0 * u * W(q + k)) /
         16.0;
}

template <FourierKernel K>
double c6(const K& w, long q, long k, Strengths s = {}) {
  auto W = [&](long j) { return w.coefficient(j); };
  double l = s.lambda, u = s.mu;
  return (W(q - 3 * k) - 3.0 * W(q - 2 * k) + 3.0 * W(q - k) - 2.0 * W(q) + 3.0 * W(q + k) -
          3.0 * W(q + 2 * k) + W(q + 3 * k) - 12.0 * l * W(q - k) - 16.0 * l * W(q) -
          12.0 * l * W(q + k) - 2.0 * u * W(q)) /
         16.0;
}

// Partial derivative of c1 with respect to the range r at fixed strengths.
template <FourierKernel K>
double c1_dr(const K& w, long q, long k, Strengths s = {}) {
  return 0.25 * (w.coefficient_dr(q - k) + w.coefficient_dr(q + k) -
                 (2.0 + 4.0 * s.lambda + 2.0 * s.mu) * w.coefficient_dr(q));
}

template <FourierKernel K>
double tail_limit(const K& w, long q, Strengths s = {}) {
  return 0.25 * w.coefficient(q) * (-2.0 - (4.0 * s.lambda + 2.0 * s.mu));
}

// Continuum (indicator kernel) overloads.

inline double c1(long q, long k, const Params& p) { return c1(IndicatorKernel{p.r()}, q, k, p.strengths()); }
inline double c2(long q, long k, const Params& p) { return c2(IndicatorKernel{p.r()}, q, k, p.strengths()); }
inline double c3(long q, long m, long k, const Params& p) { return c3(IndicatorKernel{p.r()}, q, m, k); }
inline double c4(long q, long m, long k, const Params& p) { return c4(IndicatorKernel{p.r()}, q, m, k); }
inline double c5(long q, long k, const Params& p) { return c5(IndicatorKernel{p.r()}, q, k, p.strengths()); }
inline double c6(long q, long k, const Params& p) { return c6(IndicatorKernel{p.r()}, q, k, p.strengths()); }
inline double tail_limit(long q, const Params& p) { return tail_limit(IndicatorKernel{p.r()}, q, p.strengths()); }

enum class Coefficient { c2, c3, c4, c5, c6 };

struct CoefficientQuery {
  Coefficient name;
  long q;
  long k;
  std::optional<long> m;
  Params p;
};

inline double coefficient(const CoefficientQuery& query) {
  bool needs_m = query.name == Coefficient::c3 || query.name == Coefficient::c4;
  require(query.q >= 1, "twist number q must be positive");
  if (needs_m && !query.m) fail(ErrorKind::argument, "c3 and c4 require the mode m");
  if (!needs_m && query.m) fail(ErrorKind::argument, "m is only meaningful for c3 and c4");
  switch (query.name) {
    case Coefficient::c2: return c2(query.q, query.k, query.p);
    case Coefficient::c3: return c3(query.q, *query.m, query.k, query.p);
    case Coefficient::c4: return c4(query.q, *query.m, query.k, query.p);
    case Coefficient::c5: return c5(query.q, query.k, query.p);
    case Coefficient::c6: return c6(query.q, query.k, query.p);
  }
  return 0.0;
}

namespace detail {

inline double nonzero_w_hat(long q, double r, const char* what) {
  double wq = w_hat(r, q);
  if (std::abs(wq) < degeneracy_tol) {
    std::ostringstream os;
    os << what << ": W_hat_r(q) vanishes at q=" << q << ", r=" << r;
    fail(ErrorKind::degenerate_kernel, os.str());
  }
  return wq;
}

}  // namespace detail

inline double big_H(long q, double r) {
  Params{r};
  double wq = detail::nonzero_w_hat(q, r, "H(q,r) undefined");
  return (w_hat(r, 0) + w_hat(r, 2 * q) - 2.0 * wq) / wq;
}

// Triplet strength at which the q-twisted state changes stability (mu = 0).
inline double lambda0(long q, double r0) {
  Params{r0};
  double wq = detail::nonzero_w_hat(q, r0, "stabilization impossible");
  double value = (w_hat(r0, 2 * q) + w_hat(r0, 0) - 2.0 * wq) / (4.0 * wq);
  if (std::abs(value + 0.5) < degeneracy_tol) {
    fail(ErrorKind::consistency, "lambda0 evaluated to -1/2");
  }
  return value;
}

inline double iota(double upsilon) {
  require(upsilon >= 0.0, "iota requires upsilon >= 0");
  double s1 = std::sin(two_pi * upsilon);
  double s2 = std::sin(2.0 * two_pi * upsilon);
  double s3 = std::sin(3.0 * two_pi * upsilon);
  double den = -s1 + s3 / 3.0 - (two_pi * upsilon + 0.5 * s2 - 2.0 * s1);
  if (std::abs(den / two_pi) < degeneracy_tol) {
    std::ostringstream os;
    os.precision(17);
    os << "iota has a singular point at upsilon=" << upsilon;
    fail(ErrorKind::singular_point, os.str());
  }
  double num = -s1 + 2.0 * two_pi * upsilon - s2 + s3 / 3.0;
  return -s1 / two_pi + num / (8.0 * den) * (-4.0 * upsilon + s2 / pi);
}

inline double cap_X(long q, double r) {
  Params{r};
  require(q >= 1, "twist number q must be positive");
  return iota(static_cast<double>(q) * r) / static_cast<double>(q);
}

// Root of 2 = 2*pi*u - sin(2*pi*u).
inline double upsilon0() {
  static const double root = [] {
    auto f = [](double u) { return two_pi * u - std::sin(two_pi * u) - 2.0; };
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 4e-16; };
    auto [lo, hi] = boost::math::tools::toms748_solve(f, 0.25, 0.5, tol, iters);
    double u = 0.5 * (lo + hi);
    return u;
  }();
  return root;
}

}  // namespace twistlab

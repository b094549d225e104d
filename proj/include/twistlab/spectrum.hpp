#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "twistlab/kernel.hpp"

namespace twistlab {

struct SpectrumReport {
  long q = 1;
  Params p{0.5};
  ModelSign sign = ModelSign::attractive;
  std::vector<double> eigenvalues;  // eigenvalues[k-1] is the value for mode k
  double sup_value = 0.0;
  std::optional<long> sup_attained_at;  // empty means the supremum is the tail limit
  double tail = 0.0;
  double truncation_bound = 0.0;

  long modes() const { return static_cast<long>(eigenvalues.size()); }
  double at(long k) const { return eigenvalues.at(static_cast<std::size_t>(k - 1)); }
};

// |c1(k) - tail| <= truncation_bound(q, K) for every k > K.
inline double truncation_bound(long q, long K) {
  double a = static_cast<double>(K + 1 - q), b = static_cast<double>(K + 1 + q);
  return (1.0 / a + 1.0 / b) / two_pi;
}

inline long truncation_modes(long q, double tol) {
  require(tol > 0.0, "spectrum tolerance must be positive");
  double need = std::ceil(1.0 / (pi * tol)) + static_cast<double>(q);
  require(need < 1e9, "spectrum tolerance too small");
  return std::max({4 * q, static_cast<long>(need), 64L});
}

namespace detail {

struct ScanResult {
  double best = -std::numeric_limits<double>::infinity();
  long arg = 0;
};

// Maximum of sigma * c1(q, k) over k in [1, K], skipping `skip`.
inline ScanResult scan_modes(long q, const Params& p, long K, double sigma, long skip = 0) {
  IndicatorKernel w{p.r()};
  Strengths s = p.strengths();
  ScanResult out;
  for (long k = 1; k <= K; ++k) {
    if (k == skip) continue;
    double v = sigma * c1(w, q, k, s);
    if (v > out.best) {
      out.best = v;
      out.arg = k;
    }
  }
  return out;
}

}  // namespace detail

inline SpectrumReport spectrum_report(long q, const Params& p, double tol,
                                      ModelSign sign = ModelSign::attractive) {
  require(q >= 1, "twist number q must be positive");
  long K = truncation_modes(q, tol);
  double sigma = sign_factor(sign);
  IndicatorKernel w{p.r()};
  Strengths s = p.strengths();

  SpectrumReport rep;
  rep.q = q;
  rep.p = p;
  rep.sign = sign;
  rep.eigenvalues.resize(static_cast<std::size_t>(K));
  double best = -std::numeric_limits<double>::infinity();
  long arg = 0;
  for (long k = 1; k <= K; ++k) {
    double v = sigma * c1(w, q, k, s);
    rep.eigenvalues[static_cast<std::size_t>(k - 1)] = v;
    if (v > best) {
      best = v;
      arg = k;
    }
  }
  rep.tail = sigma * tail_limit(q, p);
  rep.truncation_bound = truncation_bound(q, K);
  if (rep.tail > best) {
    rep.sup_value = rep.tail;
  } else {
    rep.sup_value = best;
    rep.sup_attained_at = arg;
  }
  return rep;
}

// Supremum of sigma * c1(q, k) over all k != ell, tail included.
inline double kappa(long q, long ell, const Params& p, double tol,
                    ModelSign sign = ModelSign::attractive) {
  require(q >= 1 && ell >= 1, "kappa requires q >= 1 and ell >= 1");
  long K = truncation_modes(q, tol);
  double sigma = sign_factor(sign);
  auto scan = detail::scan_modes(q, p, K, sigma, ell);
  return std::max(scan.best, sigma * tail_limit(q, p));
}

// Mode carrying the strict maximum of sigma * c1, certified against the tail.
// Empty when the supremum is the tail limit or cannot be separated from it.
inline std::optional<long> leading_mode(long q, const Params& p,
                                        ModelSign sign = ModelSign::attractive) {
  double sigma = sign_factor(sign);
  double tail = sigma * tail_limit(q, p);
  long K = std::max(4 * q, 64L);
  auto scan = detail::scan_modes(q, p, K, sigma);
  while (true) {
    double gap = scan.best - tail;
    if (gap <= 0.0) return std::nullopt;
    if (truncation_bound(q, K) < 0.5 * gap) return scan.arg;
    long next = static_cast<long>(std::ceil(2.0 / (pi * gap))) + q + 1;
    if (next > 20'000'000) return std::nullopt;
    next = std::max(next, 2 * K);
    auto more = detail::scan_modes(q, p, next, sigma);
    scan = more;
    K = next;
  }
}

// Every mode of sigma * c1 is strictly positive, tail included (certified).
inline bool all_modes_positive(long q, const Params& p, ModelSign sign = ModelSign::attractive) {
  double sigma = sign_factor(sign);
  double tail = sigma * tail_limit(q, p);
  if (tail <= 0.0) return false;
  long K = std::max(4 * q, 64L);
  while (truncation_bound(q, K) >= tail) {
    K = std::max(2 * K, static_cast<long>(std::ceil(1.0 / (pi * tail))) + q + 1);
    if (K > 20'000'000) return false;
  }
  return detail::scan_modes(q, p, K, -sigma).best < 0.0;
}

enum class ThresholdKind { attractive_r0, repulsive_r0, r_star };

inline constexpr double threshold_scan_step = 1e-3;

inline double threshold(long q, ThresholdKind kind) {
  require(q >= 1, "twist number q must be positive");
  const double h = threshold_scan_step;
  auto bisect = [](auto pred, double lo, double hi, double tol) {
    // pred(lo) false, pred(hi) true
    while (hi - lo > tol) {
      double mid = 0.5 * (lo + hi);
      (pred(mid) ? hi : lo) = mid;
    }
    return hi;
  };

  switch (kind) {
    case ThresholdKind::attractive_r0: {
      auto f = [q](double r) { return c1(q, 1, Params{r}); };
      double prev = h;
      double fprev = f(prev);
      for (int i = 2; i <= 500; ++i) {
        double r = i * h;
        double fr = f(r);
        if (fprev < 0.0 && fr >= 0.0) {
          std::uintmax_t iters = 200;
          auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-15; };
          auto [lo, hi] = boost::math::tools::toms748_solve(f, prev, r, fprev, fr, tol, iters);
          return std::abs(f(lo)) < std::abs(f(hi)) ? lo : hi;
        }
        prev = r;
        fprev = fr;
      }
      fail(ErrorKind::no_threshold, "c1(q,1) never crosses zero from below on (0, 1/2]");
    }
    case ThresholdKind::repulsive_r0: {
      if (q == 1) fail(ErrorKind::no_bifurcation, "for q=1 there is no bifurcation in the repulsive model");
      auto stable = [q](double r) { return all_modes_positive(q, Params{r}); };
      double prev = h;
      for (int i = 2; i <= 500; ++i) {
        double r = i * h;
        if (stable(r)) return bisect(stable, prev, r, 1e-12);
        prev = r;
      }
      fail(ErrorKind::no_threshold, "no repulsive stability window found on (0, 1/2]");
    }
    case ThresholdKind::r_star: {
      auto leads = [q](double r) {
        auto m = leading_mode(q, Params{r});
        return m && *m == q;
      };
      double good = 0.5;
      if (!leads(good)) fail(ErrorKind::no_threshold, "mode q is not leading at r = 1/2");
      for (int i = 499; i >= 1; --i) {
        double r = i * h;
        if (!leads(r)) return bisect(leads, r, good, 1e-10);
        good = r;
      }
      return good;
    }
  }
  return 0.0;
}

inline bool sufficient_condition(long q, double r) {
  return 2.0 / (pi * static_cast<double>(q)) <= 2.0 * r - std::sin(two_pi * r) / pi;
}

enum class AltCoupling { general_d, product4, triangle };

struct AltExtras {
  int d = 2;
  int m_last = -2;  // coefficient m_{d+1} of x in the kernel argument
  long L = 400;     // truncation of the triangle sum
};

struct TruncatedSum {
  double value = 0.0;
  double tail_bound = 0.0;
};

inline TruncatedSum triangle_eigenvalue(long q, double r, long k, long L) {
  Params{r};
  require(k >= 0, "mode k must be non-negative");
  if (k == 0) return {};
  require(L > q + k, "triangle truncation L must exceed q + k");
  auto W = [r](long j) { return w_hat(r, j); };
  double sum = 0.0;
  for (long l = -L; l <= L; ++l) {
    sum += W(-k + l - q) * W(l + q) + W(-k + l + q) * W(l - q) + W(l - q) * W(k + q + l) +
           W(l + q) * W(k - q + l) - 4.0 * W(l - q) * W(l + q);
  }
  return {sum / 8.0, 8.0 / (pi * pi * static_cast<double>(L - q - k))};
}

inline double alt_eigenvalue(AltCoupling family, long q, double r, long k, const AltExtras& extras = {}) {
  Params{r};
  require(q >= 1, "twist number q must be positive");
  require(k >= 0, "mode k must be non-negative");
  if (k == 0) return 0.0;
  switch (family) {
    case AltCoupling::general_d:
      require(extras.d >= 1 && extras.m_last != 0, "general_d requires d >= 1 and m_{d+1} != 0");
      return 0.5 * extras.m_last * w_hat(r, q);
    case AltCoupling::product4:
      return 0.25 * w_hat(r, q) * (w_hat(r, q + k) + w_hat(r, q - k) - 2.0 * w_hat(r, q));
    case AltCoupling::triangle:
      return triangle_eigenvalue(q, r, k, extras.L).value;
  }
  return 0.0;
}

}  // namespace twistlab

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "twistlab/kernel.hpp"
#include "twistlab/parallel.hpp"
#include "twistlab/spectrum.hpp"

namespace twistlab {

inline constexpr double crossing_tol = 1e-6;
inline constexpr double criticality_band = 1e-10;

// A family of kernels indexed by the range r. period() is 0 for the
// continuum and M for an M-periodic sampled kernel.
template <class F>
concept KernelFamily = requires(const F& f, double r) {
  { f.at(r) } -> FourierKernel;
  { f.period() } -> std::convertible_to<long>;
};

struct ContinuumFamily {
  IndicatorKernel at(double r) const { return {r}; }
  long period() const { return 0; }
};

enum class CurveFamily { r_linear, lambda_linear, mixed_linear, t_family };

struct CurveSpec {
  CurveFamily family = CurveFamily::r_linear;
  Params base{0.25};
  std::array<double, 3> direction{1.0, 0.0, 0.0};
  double t = 0.0;
  long q = 1;
  long ell = 1;

  Params at(double s) const {
    return {base.r() + s * direction[0], base.lambda() + s * direction[1],
            base.mu() + s * direction[2]};
  }
};

namespace detail {

template <KernelFamily F>
double family_c1(const F& fam, long q, long k, const Params& p) {
  return c1(fam.at(p.r()), q, k, p.strengths());
}

// Sup of sigma * c1 over k != ell (and its mirror for periodic kernels).
template <KernelFamily F>
double family_kappa(const F& fam, long q, long ell, const Params& p, ModelSign sign) {
  long M = fam.period();
  if (M == 0) return kappa(q, ell, p, 1e-6, sign);
  auto w = fam.at(p.r());
  double sigma = sign_factor(sign);
  double best = -std::numeric_limits<double>::infinity();
  for (long k = 1; k <= M / 2; ++k) {
    if (k == ell || k == M - ell) continue;
    best = std::max(best, sigma * c1(w, q, k, p.strengths()));
  }
  return best;
}

template <KernelFamily F>
long detect_critical_mode(const F& fam, long q, const Params& p) {
  auto w = fam.at(p.r());
  Strengths s = p.strengths();
  long K;
  if (fam.period() > 0) {
    K = fam.period() / 2;
  } else {
    double tail = std::abs(tail_limit(w, q, s));
    if (tail < 2.0 * crossing_tol) {
      fail(ErrorKind::argument, "tail limit of the spectrum is critical; no isolated crossing mode");
    }
    K = std::max({4 * q, 64L, static_cast<long>(std::ceil(2.0 / (pi * tail))) + q + 1});
    if (K > 20'000'000) fail(ErrorKind::resource, "critical mode search needs too many modes");
  }
  std::optional<long> found;
  for (long k = 1; k <= K; ++k) {
    if (std::abs(c1(w, q, k, s)) < crossing_tol) {
      if (found) {
        std::ostringstream os;
        os << "modes " << *found << " and " << k << " cross simultaneously";
        fail(ErrorKind::argument, os.str());
      }
      found = k;
    }
  }
  if (!found) fail(ErrorKind::argument, "no eigenvalue crosses zero at the base point");
  return *found;
}

}  // namespace detail

template <KernelFamily F = ContinuumFamily>
CurveSpec make_curve(CurveFamily family, long q, const Params& base, std::array<double, 3> direction,
                     std::optional<long> ell = std::nullopt, const F& fam = {}) {
  require(q >= 1, "twist number q must be positive");
  require(base.r() < 0.5, "curve base point must lie strictly inside the parameter space (r < 1/2)");
  CurveSpec c;
  c.family = family;
  c.base = base;
  c.direction = direction;
  c.q = q;
  c.ell = ell ? *ell : detail::detect_critical_mode(fam, q, base);
  require(c.ell >= 1, "critical mode ell must be positive");
  double v = detail::family_c1(fam, q, c.ell, base);
  if (!(std::abs(v) < crossing_tol)) {
    std::ostringstream os;
    os << "c1(q=" << q << ", ell=" << c.ell << ") = " << v << " at the base point is not a crossing";
    fail(ErrorKind::argument, os.str());
  }
  return c;
}

template <KernelFamily F = ContinuumFamily>
CurveSpec make_r_linear(long q, const Params& base, std::optional<long> ell = std::nullopt, const F& fam = {}) {
  return make_curve(CurveFamily::r_linear, q, base, {1.0, 0.0, 0.0}, ell, fam);
}

template <KernelFamily F = ContinuumFamily>
CurveSpec make_lambda_linear(long q, const Params& base, std::optional<long> ell = std::nullopt,
                             const F& fam = {}) {
  return make_curve(CurveFamily::lambda_linear, q, base, {0.0, 1.0, 0.0}, ell, fam);
}

// p_t(s) = (r0, 4s - 2t + H(q,r0)/4, 2s + 4t); the crossing mode is q.
inline CurveSpec make_t_family(long q, double r0, double t) {
  double h = big_H(q, r0);
  auto c = make_curve(CurveFamily::t_family, q, Params{r0, -2.0 * t + h / 4.0, 4.0 * t}, {0.0, 4.0, 2.0}, q);
  c.t = t;
  return c;
}

enum class Criticality { subcritical, supercritical, degenerate };
enum class BranchSide { s_negative, s_positive };

inline const char* to_string(Criticality c) {
  switch (c) {
    case Criticality::subcritical: return "subcritical";
    case Criticality::supercritical: return "supercritical";
    case Criticality::degenerate: return "degenerate";
  }
  return "";
}

inline const char* to_string(BranchSide b) {
  return b == BranchSide::s_negative ? "s_negative" : "s_positive";
}

struct BifurcationReport {
  long q = 1;
  long ell = 1;
  ModelSign sign = ModelSign::attractive;
  // Coefficients of the unsigned (attractive) right-hand side. The repulsive
  // model multiplies both by -1, which leaves the branch unchanged.
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  Criticality criticality = Criticality::degenerate;
  BranchSide branch_side = BranchSide::s_negative;
  double kappa_at_bifurcation = 0.0;
  double branch_eig_coefficient = 0.0;
  bool degenerate_crossing = false;
  double second_harmonic_coefficient = 0.0;  // -c2(q,ell)/c1(q,2ell)
};

template <KernelFamily F = ContinuumFamily>
BifurcationReport gamma_pair(const CurveSpec& curve, const F& fam = {},
                             ModelSign sign = ModelSign::attractive) {
  const Params& p0 = curve.base;
  const long q = curve.q, l = curve.ell;
  auto w = fam.at(p0.r());
  Strengths s = p0.strengths();

  double c1_2l = c1(w, q, 2 * l, s);
  if (std::abs(c1_2l) < degeneracy_tol) {
    std::ostringstream os;
    os << "second-harmonic resonance: c1(q, 2*ell) vanishes for q=" << q << ", ell=" << l;
    fail(ErrorKind::resonance, os.str());
  }
  double c2v = c2(w, q, l, s);
  double sigma = sign_factor(sign);

  BifurcationReport rep;
  rep.q = q;
  rep.ell = l;
  rep.sign = sign;
  rep.gamma1 = 0.5 * (c5(w, q, l, s) - c2v * c3(w, q, 2 * l, l) / c1_2l);
  double wq = w.coefficient(q);
  rep.gamma2 = c1_dr(w, q, l, s) * curve.direction[0] - wq * curve.direction[1] -
               0.5 * wq * curve.direction[2];
  rep.degenerate_crossing = std::abs(rep.gamma2) < degeneracy_tol;

  double g1 = sigma * rep.gamma1;
  if (std::abs(g1) < criticality_band) {
    rep.criticality = Criticality::degenerate;
  } else {
    rep.criticality = g1 > 0.0 ? Criticality::subcritical : Criticality::supercritical;
  }
  rep.branch_side = rep.gamma2 / rep.gamma1 > 0.0 ? BranchSide::s_negative : BranchSide::s_positive;
  rep.kappa_at_bifurcation = detail::family_kappa(fam, q, l, p0, sign);
  rep.branch_eig_coefficient = 2.0 * g1;
  rep.second_harmonic_coefficient = -c2v / c1_2l;
  return rep;
}

inline double gamma1_t(long q, double r0, double t) {
  double g0 = gamma_pair(make_t_family(q, r0, 0.0)).gamma1;
  return g0 + t * cap_X(q, r0);
}

inline double a_app(const BifurcationReport& rep, double s) {
  if (std::abs(rep.gamma1) < criticality_band) {
    fail(ErrorKind::argument, "a_app undefined for degenerate gamma1");
  }
  if (s == 0.0) return 0.0;
  double v = -rep.gamma2 * s / rep.gamma1;
  if (v < 0.0) {
    std::ostringstream os;
    os << "no bifurcating branch at s=" << s << " (branch exists for "
       << (rep.branch_side == BranchSide::s_negative ? "s <= 0" : "s >= 0") << ")";
    fail(ErrorKind::branch_absent, os.str());
  }
  return std::sqrt(v);
}

inline double branch_eigenvalue_prediction(const BifurcationReport& rep, double a) {
  return rep.branch_eig_coefficient * a * a;
}

struct BranchProfile {
  long q = 1;
  long ell = 1;
  double a = 0.0;
  int order = 1;
  double z2_coefficient = 0.0;
  std::vector<double> x;
  std::vector<double> psi_q;
  std::vector<double> z1;
  std::vector<double> z2;

  const std::vector<double>& values() const { return order == 2 ? z2 : z1; }
};

// Samples Z1 = Psi_q + a u_ell and Z2 = Z1 + z2_coefficient u_{2 ell} on x_j = j / n.
inline BranchProfile sample_branch(long q, long ell, double a, double second_harmonic, int order,
                                   long grid_size) {
  require(order == 1 || order == 2, "branch order must be 1 or 2");
  require(grid_size >= 1, "grid size must be positive");
  BranchProfile b;
  b.q = q;
  b.ell = ell;
  b.a = a;
  b.order = order;
  b.z2_coefficient = 0.5 * a * a * second_harmonic;
  auto n = static_cast<std::size_t>(grid_size);
  b.x.resize(n);
  b.psi_q.resize(n);
  b.z1.resize(n);
  b.z2.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    double x = static_cast<double>(j) / static_cast<double>(grid_size);
    double base = two_pi * static_cast<double>(q) * x;
    double u1 = std::sin(two_pi * static_cast<double>(ell) * x);
    double u2 = std::sin(two_pi * static_cast<double>(2 * ell) * x);
    b.x[j] = x;
    b.psi_q[j] = base;
    b.z1[j] = base + a * u1;
    b.z2[j] = b.z1[j] + b.z2_coefficient * u2;
  }
  return b;
}

template <KernelFamily F = ContinuumFamily>
BranchProfile branch_profile(const CurveSpec& curve, double a, int order, long grid_size, const F& fam = {}) {
  auto rep = gamma_pair(curve, fam);
  return sample_branch(curve.q, curve.ell, a, rep.second_harmonic_coefficient, order, grid_size);
}

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  long n = 2;

  double at(long i) const {
    return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  double step() const { return n > 1 ? (hi - lo) / static_cast<double>(n - 1) : 0.0; }
};

struct BoundaryPoint {
  double r = 0.0;
  double lambda = std::numeric_limits<double>::quiet_NaN();  // analytic zero crossing in lambda
  std::optional<long> grid_cell;                             // lambda index i with a sign change in [i, i+1]
  std::optional<long> ell;
  Criticality criticality = Criticality::degenerate;
  double gamma1 = std::numeric_limits<double>::quiet_NaN();
  double gamma2 = std::numeric_limits<double>::quiet_NaN();
  std::string flag;  // empty when the point was classified
};

struct StabilityMap {
  long q = 1;
  GridAxis r_axis;
  GridAxis lambda_axis;
  std::vector<double> max_eig;  // max_eig[ir * lambda_axis.n + il]
  std::vector<BoundaryPoint> boundary;  // one entry per r column

  double at(long ir, long il) const {
    return max_eig[static_cast<std::size_t>(ir * lambda_axis.n + il)];
  }
};

// Maximal eigenvalue over the (r, lambda) grid at mu = 0. A shift in lambda
// moves every eigenvalue by -lambda W_hat_r(q), so each r column needs one
// spectrum evaluation.
inline StabilityMap stability_map(long q, GridAxis r_axis, GridAxis lambda_axis, unsigned threads = 1,
                                  double tol = 1e-6) {
  require(q >= 1, "twist number q must be positive");
  require(r_axis.n >= 2 && lambda_axis.n >= 2, "stability map grid dimensions must be at least 2");
  require(r_axis.lo > 0.0 && r_axis.hi <= 0.5 && r_axis.lo < r_axis.hi, "r range must lie in (0, 1/2]");
  require(lambda_axis.lo < lambda_axis.hi, "lambda range must be increasing");

  StabilityMap map;
  map.q = q;
  map.r_axis = r_axis;
  map.lambda_axis = lambda_axis;
  map.max_eig.assign(static_cast<std::size_t>(r_axis.n * lambda_axis.n), 0.0);
  map.boundary.resize(static_cast<std::size_t>(r_axis.n));

  parallel_for(static_cast<std::size_t>(r_axis.n), threads, [&](std::size_t ir) {
    double r = r_axis.at(static_cast<long>(ir));
    Params p{r};
    auto rep = spectrum_report(q, p, tol);
    double wq = w_hat(r, q);
    for (long il = 0; il < lambda_axis.n; ++il) {
      map.max_eig[ir * static_cast<std::size_t>(lambda_axis.n) + static_cast<std::size_t>(il)] =
          rep.sup_value - lambda_axis.at(il) * wq;
    }

    BoundaryPoint bp;
    bp.r = r;
    for (long il = 0; il + 1 < lambda_axis.n; ++il) {
      double a = map.at(static_cast<long>(ir), il), b = map.at(static_cast<long>(ir), il + 1);
      if ((a > 0.0) != (b > 0.0)) {
        bp.grid_cell = il;
        break;
      }
    }
    if (std::abs(wq) < degeneracy_tol) {
      bp.flag = "degenerate_kernel";
    } else {
      bp.lambda = rep.sup_value / wq;
      if (bp.lambda < lambda_axis.lo || bp.lambda > lambda_axis.hi) {
        bp.flag = "outside_range";
      } else if (!rep.sup_attained_at) {
        bp.flag = "tail_supremum";
      } else {
        bp.ell = rep.sup_attained_at;
        try {
          auto curve = make_lambda_linear(q, Params{r, bp.lambda, 0.0}, bp.ell);
          auto br = gamma_pair(curve);
          bp.gamma1 = br.gamma1;
          bp.gamma2 = br.gamma2;
          bp.criticality = br.criticality;
        } catch (const Error& e) {
          bp.flag = std::string(to_string(e.kind()));
        }
      }
    }
    map.boundary[ir] = bp;
  });
  return map;
}

}  // namespace twistlab

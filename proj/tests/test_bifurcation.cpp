#include <catch_amalgamated.hpp>

#include <boost/math/tools/roots.hpp>

#include "twistlab/bifurcation.hpp"

using namespace twistlab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

double central_gamma2(const CurveSpec& c, double h = 1e-6) {
  return (c1(c.q, c.ell, c.at(h)) - c1(c.q, c.ell, c.at(-h))) / (2 * h);
}

template <class Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::argument;
}

}  // namespace

TEST_CASE("attractive pitchfork coefficients for q = 5") {
  double r0 = threshold(5, ThresholdKind::attractive_r0);
  auto curve = make_r_linear(5, Params{r0});
  CHECK(curve.ell == 1);
  auto rep = gamma_pair(curve);
  CHECK_THAT(rep.gamma1, WithinRel(9.494e-3, 0.01));
  CHECK_THAT(rep.gamma2, WithinRel(8.400e-2, 0.01));
  CHECK(rep.criticality == Criticality::subcritical);
  CHECK(rep.branch_side == BranchSide::s_negative);
  CHECK(rep.branch_eig_coefficient == 2.0 * rep.gamma1);
  CHECK_THAT(a_app(rep, -1e-4), WithinRel(2.974e-2, 0.01));
}

TEST_CASE("repulsive pitchfork coefficients for q = 5") {
  double r0 = threshold(5, ThresholdKind::repulsive_r0);
  auto curve = make_r_linear(5, Params{r0}, 11L);
  auto rep = gamma_pair(curve, ContinuumFamily{}, ModelSign::repulsive);
  CHECK_THAT(rep.gamma1, WithinRel(1.38e-3, 0.05));
  CHECK_THAT(rep.gamma2, WithinRel(2.12, 0.05));
  CHECK(rep.criticality == Criticality::supercritical);
  CHECK(rep.kappa_at_bifurcation < 0.0);
  CHECK_THAT(a_app(rep, -1e-5), WithinRel(0.0394 * pi, 0.05));
  CHECK(branch_eigenvalue_prediction(rep, a_app(rep, -1e-5)) < 0.0);
}

TEST_CASE("gamma2 matches a central difference along the curve") {
  for (long q : {2L, 5L, 9L}) {
    double r0 = threshold(q, ThresholdKind::attractive_r0);
    auto c = make_r_linear(q, Params{r0});
    CHECK_THAT(gamma_pair(c).gamma2, WithinRel(central_gamma2(c), 1e-5));
  }
  double r0 = threshold(5, ThresholdKind::attractive_r0);
  Params base{r0, 0.0, 0.0};
  auto lam = make_lambda_linear(5, base, 1L);
  CHECK_THAT(gamma_pair(lam).gamma2, WithinRel(central_gamma2(lam), 1e-5));
  auto mixed = make_curve(CurveFamily::mixed_linear, 5, base, {0.3, -0.7, 1.1}, 1L);
  CHECK_THAT(gamma_pair(mixed).gamma2, WithinRel(central_gamma2(mixed), 1e-5));
}

TEST_CASE("curve construction checks the crossing") {
  CHECK(kind_of([] { make_r_linear(5, Params{0.1}, 1L); }) == ErrorKind::argument);
  CHECK(kind_of([] { make_r_linear(5, Params{0.5}); }) == ErrorKind::argument);
}

TEST_CASE("t family") {
  const long q = 3;
  const double r0 = 0.2;
  for (double t : {-1.0, 0.0, 0.4, 2.5}) {
    auto c = make_t_family(q, r0, t);
    CHECK(c.ell == q);
    auto rep = gamma_pair(c);
    CHECK_THAT(rep.gamma2, WithinAbs(-5.0 * w_hat(r0, q), 1e-12));
    CHECK_THAT(gamma1_t(q, r0, t), WithinAbs(rep.gamma1, 1e-10));
  }
  CHECK(gamma1_t(q, r0, 0.0) == gamma_pair(make_t_family(q, r0, 0.0)).gamma1);
  double slope = (gamma_pair(make_t_family(q, r0, 1.0)).gamma1 - gamma_pair(make_t_family(q, r0, -1.0)).gamma1) / 2.0;
  CHECK_THAT(slope, WithinRel(cap_X(q, r0), 1e-8));
  CHECK_THAT(slope, WithinRel(iota(q * r0) / q, 1e-8));

  // q r0 = 0.6 >= upsilon0, so t switches the criticality.
  REQUIRE(q * r0 >= upsilon0());
  double g0 = gamma1_t(q, r0, 0.0), x = cap_X(q, r0);
  REQUIRE(x > 0.0);
  double t_neg = -(std::abs(g0) + 1.0) / x, t_pos = (std::abs(g0) + 1.0) / x;
  CHECK(gamma_pair(make_t_family(q, r0, t_neg)).criticality == Criticality::supercritical);
  CHECK(gamma_pair(make_t_family(q, r0, t_pos)).criticality == Criticality::subcritical);
}

TEST_CASE("approximate branch amplitude") {
  double r0 = threshold(5, ThresholdKind::attractive_r0);
  auto rep = gamma_pair(make_r_linear(5, Params{r0}));
  CHECK(a_app(rep, 0.0) == 0.0);
  for (double s : {-1e-6, -1e-4, -3e-3}) {
    double a = a_app(rep, s);
    CHECK_THAT(a * a * rep.gamma1 + rep.gamma2 * s, WithinAbs(0.0, 1e-15));
  }
  CHECK(kind_of([&] { a_app(rep, 1e-4); }) == ErrorKind::branch_absent);

  BifurcationReport manual;
  manual.gamma1 = 9.494e-3;
  manual.gamma2 = 8.400e-2;
  CHECK_THAT(a_app(manual, -1e-4), WithinAbs(2.974e-2, 5e-5));
  manual.gamma1 = 1.38e-3;
  manual.gamma2 = 2.12;
  CHECK_THAT(a_app(manual, -1e-5), WithinAbs(0.1239, 5e-4));
  manual.gamma1 = 0.0;
  CHECK(kind_of([&] { a_app(manual, -1e-5); }) == ErrorKind::argument);
}

TEST_CASE("branch profiles") {
  double r0 = threshold(5, ThresholdKind::attractive_r0);
  auto curve = make_r_linear(5, Params{r0});
  auto rep = gamma_pair(curve);
  const long n = 1000;

  for (int order : {1, 2}) {
    auto b = branch_profile(curve, 0.0, order, n);
    for (std::size_t j = 0; j < b.x.size(); ++j) CHECK(b.values()[j] == b.psi_q[j]);
  }

  double a = a_app(rep, -1e-4);
  auto p1 = branch_profile(curve, a, 1, n);
  auto p2 = branch_profile(curve, a, 2, n);
  CHECK(p1.values()[0] == 0.0);
  CHECK(p2.values()[0] == 0.0);
  double coef = -0.5 * a * a * c2(5, 1, curve.base) / c1(5, 2, curve.base);
  CHECK_THAT(p2.z2_coefficient, WithinRel(coef, 1e-14));
  double amp = 0.0;
  for (std::size_t j = 0; j < p1.x.size(); ++j) {
    double x = p1.x[j];
    CHECK(p1.values()[j] == 2.0 * pi * 5.0 * x + a * std::sin(2.0 * pi * x));
    double diff = p2.values()[j] - p1.values()[j];
    CHECK_THAT(diff, WithinAbs(coef * std::sin(2.0 * pi * 2.0 * x), 1e-14));
    amp = std::max(amp, std::abs(diff));
  }
  CHECK_THAT(amp, WithinRel(0.5 * a * a * std::abs(c2(5, 1, curve.base) / c1(5, 2, curve.base)), 1e-6));

  // The difference lives in the 2 ell mode only.
  for (long m = 1; m <= 8; ++m) {
    double s = 0.0, c = 0.0;
    for (std::size_t j = 0; j < p1.x.size(); ++j) {
      double d = p2.values()[j] - p1.values()[j];
      s += d * std::sin(2.0 * pi * m * p1.x[j]);
      c += d * std::cos(2.0 * pi * m * p1.x[j]);
    }
    s *= 2.0 / n;
    c *= 2.0 / n;
    CHECK_THAT(c, WithinAbs(0.0, 1e-15));
    CHECK_THAT(s, WithinAbs(m == 2 ? coef : 0.0, 1e-15));
  }
  CHECK_THROWS_AS(branch_profile(curve, a, 3, n), Error);
}

TEST_CASE("branch eigenvalue prediction follows the criticality") {
  BifurcationReport rep;
  rep.gamma1 = -0.02;
  rep.branch_eig_coefficient = 2.0 * rep.gamma1;
  CHECK(branch_eigenvalue_prediction(rep, 0.1) < 0.0);
  rep.gamma1 = 0.02;
  rep.branch_eig_coefficient = 2.0 * rep.gamma1;
  CHECK(branch_eigenvalue_prediction(rep, 0.1) > 0.0);
  CHECK_THAT(branch_eigenvalue_prediction(rep, 0.1), WithinAbs(2.0 * 0.02 * 0.01, 1e-17));
}

TEST_CASE("attractive family is subcritical where the assumptions hold") {
  long checked = 0;
  for (long q = 2; q <= 30; ++q) {
    double r0 = threshold(q, ThresholdKind::attractive_r0);
    Params p{r0};
    bool assumptions = std::abs(c1(q, 1, p)) < 1e-8 && c1(q, 2, p) < 0.0 && c1(q + 1, 1, p) > 0.0;
    if (!assumptions) continue;
    ++checked;
    auto rep = gamma_pair(make_r_linear(q, p, 1L));
    CAPTURE(q);
    CHECK(rep.gamma1 > 0.0);
    CHECK(rep.gamma2 > 0.0);
  }
  CHECK(checked == 29);
}

TEST_CASE("gamma ratio for large q") {
  const long q = 50;
  auto rep = gamma_pair(make_r_linear(q, Params{threshold(q, ThresholdKind::attractive_r0)}, 1L));
  CHECK_THAT(rep.gamma2 / (rep.gamma1 * q), WithinRel(1.723, 0.02));
}

TEST_CASE("second harmonic resonance is reported") {
  // Base point where c1(5, 2) vanishes; ell = 1 makes 2 ell resonant.
  auto f = [](double r) { return c1(5, 2, Params{r}); };
  boost::uintmax_t it = 200;
  auto [lo, hi] = boost::math::tools::toms748_solve(f, 0.066, 0.068, boost::math::tools::eps_tolerance<double>(60), it);
  CurveSpec c;
  c.q = 5;
  c.ell = 1;
  c.base = Params{0.5 * (lo + hi)};
  CHECK(kind_of([&] { gamma_pair(c); }) == ErrorKind::resonance);
  CHECK(kind_of([&] { branch_profile(c, 0.01, 2, 10); }) == ErrorKind::resonance);
}

TEST_CASE("stability map for q = 8") {
  GridAxis ra{0.02, 0.5, 128}, la{-10.0, 10.0, 128};
  auto map = stability_map(8, ra, la, 2);
  double rs = threshold(8, ThresholdKind::r_star);

  SECTION("grid values are the shifted supremum") {
    for (long ir : {0L, 40L, 127L}) {
      double r = ra.at(ir);
      auto rep = spectrum_report(8, Params{r}, 1e-6);
      for (long il : {0L, 64L, 127L})
        CHECK_THAT(map.at(ir, il), WithinAbs(rep.sup_value - la.at(il) * w_hat(r, 8), 1e-12));
    }
  }

  SECTION("zero contour follows lambda0 beyond r*") {
    long compared = 0;
    for (long ir = 0; ir < ra.n; ++ir) {
      double r = ra.at(ir);
      if (r <= rs) continue;
      double l0;
      try {
        l0 = lambda0(8, r);
      } catch (const Error&) {
        continue;
      }
      if (l0 <= la.lo || l0 >= la.hi) continue;
      ++compared;
      const auto& bp = map.boundary[static_cast<std::size_t>(ir)];
      CAPTURE(r, l0);
      REQUIRE(bp.grid_cell.has_value());
      double pos = (l0 - la.lo) / la.step();
      CHECK(std::abs(static_cast<double>(*bp.grid_cell) - pos) <= 1.0);
      CHECK_THAT(bp.lambda, WithinAbs(l0, 1e-6));
    }
    CHECK(compared > 20);
  }

  SECTION("the crossing at lambda = 0 is subcritical") {
    auto rep = gamma_pair(make_lambda_linear(8, Params{threshold(8, ThresholdKind::attractive_r0)}, 1L));
    CHECK(rep.criticality == Criticality::subcritical);
    double r0 = threshold(8, ThresholdKind::attractive_r0);
    auto edge = stability_map(8, GridAxis{r0, 0.3, 2}, la);
    const auto& bp = edge.boundary.front();
    CHECK(bp.flag.empty());
    CHECK_THAT(bp.lambda, WithinAbs(0.0, 1e-6));
    CHECK(bp.ell == std::optional<long>{1});
    CHECK(bp.criticality == Criticality::subcritical);
  }

  SECTION("maximal eigenvalue changes sign across lambda0") {
    double r = 0.3, l0 = lambda0(8, r);
    auto sup = [&](double l) { return spectrum_report(8, Params{r, l, 0.0}, 1e-6).sup_value; };
    CHECK(sup(l0 - 1e-3) * sup(l0 + 1e-3) < 0.0);
    CHECK(sup(-10.0) * sup(10.0) < 0.0);
  }

  SECTION("threads do not change the map") {
    auto serial = stability_map(8, ra, la, 1);
    CHECK(serial.max_eig == map.max_eig);
  }

  CHECK_THROWS_AS(stability_map(8, GridAxis{0.02, 0.5, 1}, la), Error);
}

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "twistlab/bifurcation.hpp"
#include "twistlab/ring.hpp"

using namespace twistlab;
using namespace twistlab::ring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Direct triple and quadruple sums, pinned to index 0.
Eigen::VectorXd direct_rhs(const Eigen::VectorXd& th, const SystemSpec& s, const CouplingWeights& w) {
  const long M = th.size();
  const double m = static_cast<double>(M);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(M);
  for (long k = 0; k < M; ++k) {
    double pair = 0.0, tri = 0.0, quad = 0.0;
    for (long j = 0; j < M; ++j) {
      pair += w[k - j] * std::sin(th[j] - th[k]);
      if (s.orders.triplet)
        for (long l = 0; l < M; ++l) tri += w[j + l - 2 * k] * std::sin(th[j] + th[l] - 2 * th[k]);
      if (s.orders.quadruplet)
        for (long l = 0; l < M; ++l)
          for (long n = 0; n < M; ++n) quad += w[j - l + n - k] * std::sin(th[j] - th[l] + th[n] - th[k]);
    }
    g[k] = pair / m + s.p.lambda() * tri / (m * m) + s.p.mu() * quad / (m * m * m);
  }
  g *= sign_factor(s.sign);
  g.array() -= g[0];
  return g;
}

Eigen::VectorXd random_state(long M, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Eigen::VectorXd t(M);
  for (long k = 0; k < M; ++k) t[k] = u(gen);
  t.array() -= t[0];
  return t;
}

double rel_sup(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / std::max(b.lpNorm<Eigen::Infinity>(), 1e-300);
}

}  // namespace

TEST_CASE("coupling weights") {
  auto w = build_weights(10, 0.25);
  CHECK(w.k0 == 2);
  std::vector<double> expected{1, 1, 1, 0.5, 0, 0, 0, 0.5, 1, 1};
  CHECK(w.b == expected);
  for (long d = 0; d < 10; ++d) CHECK(w[d] == w[10 - d]);

  auto w2 = build_weights(20, 0.15);
  CHECK(w2.k0 == 3);
  CHECK(w2.fractional_at == -1);
  CHECK(w2.sum() == 7.0);

  auto big = build_weights(10000, 0.1234567);
  CHECK_THAT(big.sum() / 10000.0, WithinAbs(2 * 0.1234567, 1e-3));
  long fractional = 0;
  for (double v : big.b) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (v > 0.0 && v < 1.0) ++fractional;
  }
  CHECK(fractional == 2);

  auto half = build_weights(10, 0.5);
  CHECK(half.sum() == 10.0);
  CHECK_THROWS_AS(build_weights(3, 0.2), Error);
  CHECK_THROWS_AS(build_weights(10, 0.6), Error);

  auto integer = build_weights(10, 0.25, WeightMode::integer);
  CHECK(integer.sum() == 5.0);
}

TEST_CASE("twisted states") {
  auto t = twisted_state(4, 1);
  CHECK_THAT(t[0], WithinAbs(0.0, 0.0));
  CHECK_THAT(t[1], WithinAbs(pi / 2, 1e-15));
  CHECK_THAT(t[2], WithinAbs(pi, 1e-15));
  CHECK_THAT(t[3], WithinAbs(3 * pi / 2, 1e-15));
  auto s = twisted_state(7, 0);
  CHECK(s.values().isZero(0.0));
  CHECK(winding_number(twisted_state(100, 7)) == 7);
}

TEST_CASE("twisted states are equilibria of every system") {
  for (long M : {16L, 101L, 512L})
    for (long q : {0L, 1L, 3L}) {
      Params p{0.17, 0.6, -0.9};
      auto w = build_weights(M, p.r());
      for (auto orders : {Orders::pairwise_only(), Orders{true, true, false}, Orders::all()}) {
        RingSystem sys(SystemSpec{p, ModelSign::attractive, orders}, w);
        auto th = twisted_state(M, q);
        CHECK(sys.rhs(th, RhsMethod::fft).lpNorm<Eigen::Infinity>() < 1e-12);
        CHECK(sys.rhs(th, RhsMethod::naive).lpNorm<Eigen::Infinity>() < 1e-12);
      }
      RingSystem rep(SystemSpec{Params{0.17}, ModelSign::repulsive, Orders::pairwise_only()}, w);
      CHECK(rep.rhs(twisted_state(M, q)).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("right-hand side matches the direct sums") {
  for (long M : {12L, 17L}) {
    Params p{0.23, 0.7, -1.3};
    auto w = build_weights(M, p.r());
    auto th = random_state(M, static_cast<std::uint64_t>(M));
    for (auto orders : {Orders::pairwise_only(), Orders{true, true, false}, Orders::all()}) {
      SystemSpec spec{p, ModelSign::attractive, orders};
      RingSystem sys(spec, w);
      auto ref = direct_rhs(th, spec, w);
      CHECK(ref[0] == 0.0);
      CHECK(rel_sup(sys.rhs(th, RhsMethod::naive), ref) < 1e-12);
      CHECK(rel_sup(sys.rhs(th, RhsMethod::fft), ref) < 1e-12);
    }
    SystemSpec rspec{Params{0.23}, ModelSign::repulsive, Orders::pairwise_only()};
    CHECK(rel_sup(RingSystem(rspec, w).rhs(th), direct_rhs(th, rspec, w)) < 1e-12);
  }
}

TEST_CASE("fft and naive right-hand sides agree") {
  for (long M : {64L, 256L, 1024L}) {
    Params p{0.31, -0.8, 1.1};
    auto w = build_weights(M, p.r());
    RingSystem sys(SystemSpec{p, ModelSign::attractive, Orders::all()}, w);
    for (std::uint64_t seed : {1u, 2u}) {
      auto th = random_state(M, seed + static_cast<std::uint64_t>(M));
      CAPTURE(M, seed);
      CHECK(rel_sup(sys.rhs(th, RhsMethod::fft), sys.rhs(th, RhsMethod::naive)) < 1e-9);
      CHECK_NOTHROW(sys.rhs_checked(th));
    }
  }
}

TEST_CASE("repulsive model is restricted to pairwise coupling") {
  auto w = build_weights(32, 0.2);
  CHECK_THROWS_AS(RingSystem(SystemSpec{Params{0.2, 0.5, 0.0}, ModelSign::repulsive, Orders::all()}, w), Error);
  CHECK_THROWS_AS(RingSystem(SystemSpec{}, w).rhs(Eigen::VectorXd::Zero(31)), Error);
}

TEST_CASE("jacobian matches finite differences of the right-hand side") {
  const long M = 48;
  Params p{0.21, 0.4, -0.6};
  auto w = build_weights(M, p.r());
  auto th = random_state(M, 99);
  for (auto orders : {Orders::pairwise_only(), Orders::all()}) {
    RingSystem sys(SystemSpec{p, ModelSign::attractive, orders}, w);
    Eigen::MatrixXd J = pinned_jacobian(sys, th);
    REQUIRE(J.rows() == M - 1);
    const double h = 1e-6;
    Eigen::MatrixXd fd(M - 1, M - 1);
    for (long c = 1; c < M; ++c) {
      Eigen::VectorXd a = th, b = th;
      a[c] += h;
      b[c] -= h;
      fd.col(c - 1) = (sys.rhs(a) - sys.rhs(b)).tail(M - 1) / (2 * h);
    }
    CHECK((J - fd).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("twisted state spectrum") {
  const long M = 400, q = 3;
  Params p{0.2};
  auto w = build_weights(M, p.r());
  RingSystem sys(SystemSpec{p, ModelSign::attractive, Orders::pairwise_only()}, w);
  auto ev = jacobian_spectrum(sys, twisted_state(M, q).values());
  REQUIRE(ev.size() == static_cast<std::size_t>(M - 1));

  SampledKernel sk(w);
  std::vector<double> exact, cont;
  for (long k = 1; k < M; ++k) exact.push_back(c1(sk, q, k));
  std::sort(exact.rbegin(), exact.rend());
  for (std::size_t i = 0; i < ev.size(); ++i) CHECK_THAT(ev[i], WithinAbs(exact[i], 1e-10));

  auto fast = twisted_spectrum(sys, q);
  std::sort(fast.rbegin(), fast.rend());
  for (std::size_t i = 0; i < ev.size(); ++i) CHECK_THAT(fast[i], WithinAbs(ev[i], 1e-10));

  // Pairs of eigenvalues converge to c1 of the continuum.
  for (long k = 1; k < M / 2; ++k) cont.push_back(c1(q, k, p));
  std::sort(cont.rbegin(), cont.rend());
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK_THAT(ev[2 * i], WithinAbs(ev[2 * i + 1], 1e-8));
    CHECK_THAT(ev[2 * i], WithinAbs(cont[i], 5.0 / M));
  }

  RingSystem rep(SystemSpec{p, ModelSign::repulsive, Orders::pairwise_only()}, w);
  auto rev = jacobian_spectrum(rep, twisted_state(M, q).values());
  CHECK_THAT(rev.front(), WithinAbs(-ev.back(), 1e-10));
  CHECK_THAT(rev.back(), WithinAbs(-ev.front(), 1e-10));
}

TEST_CASE("higher order twisted spectrum follows the sampled kernel coefficients") {
  const long M = 64, q = 3;
  Params p{0.2, 0.3, -0.4};
  auto w = build_weights(M, p.r());
  RingSystem sys(SystemSpec{p, ModelSign::attractive, Orders::all()}, w);
  auto ev = jacobian_spectrum(sys, twisted_state(M, q).values());
  SampledKernel sk(w);
  std::vector<double> c;
  for (long k = 1; k < M; ++k) c.push_back(c1(sk, q, k, p.strengths()));
  std::sort(c.rbegin(), c.rend());
  for (std::size_t i = 0; i < ev.size(); ++i) CHECK_THAT(ev[i], WithinAbs(c[i], 1e-7));
}

TEST_CASE("leading eigenvalue near the attractive threshold") {
  const long M = 1000;
  Params p{0.06632};
  RingSystem sys(SystemSpec{p, ModelSign::attractive, Orders::pairwise_only()}, build_weights(M, p.r()));
  CHECK(std::abs(leading_twisted_eigenvalue(sys, 5)) < 1e-3);
}

TEST_CASE("finite thresholds") {
  double a = finite_threshold(5, 1000, ModelSign::attractive);
  CHECK_THAT(a, WithinAbs(0.06582, 2e-4));
  double r = finite_threshold(5, 1000, ModelSign::repulsive);
  CHECK_THAT(r, WithinAbs(0.11654, 5e-4));

  double cont = threshold(5, ThresholdKind::attractive_r0);
  double e500 = std::abs(finite_threshold(5, 500, ModelSign::attractive) - cont);
  double e1000 = std::abs(a - cont);
  CHECK_THAT(e500 / e1000, WithinAbs(2.0, 0.6));

  CHECK_THROWS_AS(finite_threshold(5, 50, ModelSign::attractive), Error);
  try {
    finite_threshold(1, 100, ModelSign::repulsive);
    FAIL("expected no bifurcation");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::no_bifurcation);
  }
}

TEST_CASE("perturbations are seeded") {
  auto t = twisted_state(50, 2);
  auto a = perturb(t, 1e-2, 42), b = perturb(t, 1e-2, 42), c = perturb(t, 1e-2, 43);
  CHECK(a.values() == b.values());
  CHECK(a.values() != c.values());
  CHECK(a[0] == 0.0);
  CHECK(sup_distance(a, t) <= 1e-2);
  CHECK(perturb(t, 0.0, 42).values() == t.values());
  CHECK_THROWS_AS(perturb(t, -1.0, 1), Error);
}

TEST_CASE("symmetry shifts") {
  const long M = 64;
  auto th = perturb(twisted_state(M, 3), 0.3, 7);
  CHECK(symmetry_shift(th, 0).values() == th.values());
  CHECK(sup_distance(symmetry_shift(twisted_state(M, 3), 5), twisted_state(M, 3)) < 1e-12);
  CHECK_THROWS_AS(symmetry_shift(th, M), Error);

  for (long j : {1L, 9L, 40L}) {
    auto s = symmetry_shift(th, j);
    CHECK(s[0] == 0.0);
    CHECK(winding_number(s) == 3);
    CHECK(sup_distance(continuous_shift(th, static_cast<double>(j) / M), s) < 1e-12);
    auto al = align_shift(th, s);
    CHECK(al.distance < 1e-10);
    CHECK_THAT(al.phi, WithinAbs(static_cast<double>(j) / M, 1e-6));
  }
  CHECK(sup_distance(continuous_shift(th, 0.0), th) < 1e-12);
}

TEST_CASE("integration") {
  SECTION("twisted state stops immediately") {
    const long M = 100;
    RingSystem sys(SystemSpec{Params{0.2}, ModelSign::attractive, Orders::pairwise_only()}, build_weights(M, 0.2));
    auto res = integrate(twisted_state(M, 2), sys, IntegrateOptions{});
    CHECK(res.stop == StopReason::equilibrium);
    CHECK(res.t == 0.0);
    CHECK(res.theta.values() == twisted_state(M, 2).values());
  }

  SECTION("stable twisted state attracts nearby states") {
    const long M = 200, q = 3;
    double r = finite_threshold(q, M, ModelSign::attractive) - 0.02;
    RingSystem sys(SystemSpec{Params{r}, ModelSign::attractive, Orders::pairwise_only()}, build_weights(M, r));
    REQUIRE(leading_twisted_eigenvalue(sys, q) < 0.0);
    IntegrateOptions opt;
    opt.t_end = 1e5;
    opt.tol = 1e-10;
    auto res = integrate(perturb(twisted_state(M, q), 1e-2, 5), sys, opt);
    CHECK(res.stop == StopReason::equilibrium);
    CHECK(sup_distance(res.theta, twisted_state(M, q)) < 1e-6);
    CHECK(res.theta[0] == 0.0);
  }

  SECTION("shifts commute with the flow") {
    const long M = 64;
    Params p{0.19, 0.3, 0.2};
    RingSystem sys(SystemSpec{p, ModelSign::attractive, Orders::all()}, build_weights(M, p.r()));
    auto th = perturb(twisted_state(M, 2), 0.2, 11);
    IntegrateOptions opt;
    opt.t_end = 5.0;
    opt.tol = 1e-11;
    for (long j : {3L, 20L}) {
      auto a = integrate(symmetry_shift(th, j), sys, opt).theta;
      auto b = symmetry_shift(integrate(th, sys, opt).theta, j);
      CHECK(sup_distance(a, b) < 1e-8);
    }
  }

  SECTION("fixed step runs are reproducible") {
    const long M = 64;
    RingSystem sys(SystemSpec{Params{0.3}, ModelSign::attractive, Orders::pairwise_only()}, build_weights(M, 0.3));
    IntegrateOptions opt;
    opt.stepper = Stepper::rk4;
    opt.h0 = 0.05;
    opt.t_end = 2.0;
    opt.sample_every = 0.5;
    auto th = perturb(twisted_state(M, 1), 0.1, 3);
    auto a = integrate(th, sys, opt), b = integrate(th, sys, opt);
    CHECK(a.theta.values() == b.theta.values());
    CHECK(a.samples.size() >= 4);
    CHECK_THAT(a.t, WithinAbs(2.0, 1e-12));
  }

  SECTION("bad options are rejected") {
    RingSystem sys(SystemSpec{}, build_weights(16, 0.25));
    IntegrateOptions opt;
    opt.tol = 0.0;
    CHECK_THROWS_AS(integrate(twisted_state(16, 1), sys, opt), Error);
  }
}

TEST_CASE("newton refinement") {
  SECTION("twisted state is already converged") {
    const long M = 120;
    RingSystem sys(SystemSpec{Params{0.2}, ModelSign::attractive, Orders::pairwise_only()}, build_weights(M, 0.2));
    auto res = newton_equilibrium(twisted_state(M, 2), sys);
    CHECK(res.converged);
    CHECK(res.iterations <= 1);
    CHECK(sup_distance(res.theta, twisted_state(M, 2)) < 1e-12);
    CHECK(res.jacobian_leading_eigs.size() == 6);
    CHECK_FALSE(res.bifurcating);
    CHECK_FALSE(res.verdict.symmetry_eig);
    CHECK(res.verdict.eigs == res.jacobian_leading_eigs);
  }

  SECTION("bifurcating equilibrium lies closer to the second order profile") {
    const long M = 300, q = 5;
    double r0 = finite_threshold(q, M, ModelSign::attractive);
    SampledFamily fam{M};
    auto curve = make_r_linear(q, Params{r0}, 1L, fam);
    auto rep = gamma_pair(curve, fam);
    const double s0 = -1e-4;
    double a = a_app(rep, s0);
    double r = r0 + s0;
    RingSystem sys(SystemSpec{Params{r}, ModelSign::attractive, Orders::pairwise_only()}, build_weights(M, r));
    auto z1 = branch_profile(curve, a, 1, M, fam);
    auto z2 = branch_profile(curve, a, 2, M, fam);
    auto res = newton_equilibrium(from_samples(z1.z1), sys);
    REQUIRE(res.converged);
    CHECK(sys.rhs(res.theta).lpNorm<Eigen::Infinity>() < 1e-10);
    double e1 = sup_distance(res.theta, from_samples(z1.z1));
    double e2 = sup_distance(res.theta, from_samples(z2.z2));
    CHECK(e2 < e1);

    REQUIRE(res.bifurcating);
    REQUIRE(res.verdict.symmetry_eig);
    CHECK(std::abs(*res.verdict.symmetry_eig) < 1e-10);
    CHECK(res.verdict.eigs.size() == 5);
    double predicted = branch_eigenvalue_prediction(rep, a);
    double observed = closest_eigenvalue(res.verdict, predicted);
    CHECK(observed == res.verdict.eigs.front());
    CHECK(observed > 0.0);
    CHECK_FALSE(res.verdict.stable);
    CHECK_THAT(observed, WithinRel(predicted, 0.5));

    auto shifted = symmetry_shift(res.theta, 17);
    CHECK(sys.rhs(shifted).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("spectrum verdicts drop only the symmetry eigenvalue") {
  auto v = classify_spectrum({0.3, 1e-13, -0.2, -0.5}, 100, true);
  REQUIRE(v.symmetry_eig);
  CHECK(*v.symmetry_eig == 1e-13);
  CHECK(v.eigs == std::vector<double>{0.3, -0.2, -0.5});
  CHECK_FALSE(v.stable);

  auto s = classify_spectrum({-1e-3, -0.02, -0.5}, 1000, true);
  CHECK(*s.symmetry_eig == -1e-3);
  CHECK(s.stable);

  auto far = classify_spectrum({-0.2, -0.5}, 100, true);
  CHECK_FALSE(far.symmetry_eig);
  CHECK(far.stable);

  auto twisted = classify_spectrum({1e-13, -0.2}, 100, false);
  CHECK_FALSE(twisted.symmetry_eig);
  CHECK_FALSE(twisted.stable);

  CHECK(closest_eigenvalue(v, -0.3) == -0.2);
  CHECK(std::isnan(closest_eigenvalue(SpectrumVerdict{}, 1.0)));
}

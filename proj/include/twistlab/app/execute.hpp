#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "twistlab/app/config.hpp"
#include "twistlab/app/report.hpp"
#include "twistlab/bifurcation.hpp"
#include "twistlab/kernel.hpp"
#include "twistlab/parallel.hpp"
#include "twistlab/ring.hpp"
#include "twistlab/spectrum.hpp"

namespace twistlab::app {

// Tracks whether validation has finished; module errors raised before
// dispatch are usage errors, afterwards they are domain errors.
struct Context {
  bool dispatching = false;
  void dispatch() { dispatching = true; }
};

namespace detail {

inline const double nan = std::numeric_limits<double>::quiet_NaN();

inline ModelSign parse_sign(const RunConfig& c) {
  return to_choice("sign", c.get("sign"), {"attractive", "repulsive"}) == "attractive" ? ModelSign::attractive
                                                                                       : ModelSign::repulsive;
}

inline std::string sign_name(ModelSign s) { return s == ModelSign::attractive ? "attractive" : "repulsive"; }

inline ring::Orders parse_orders(const RunConfig& c) {
  ring::Orders o{false, false, false};
  for (const auto& s : split(c.get("orders"), ',')) {
    auto v = to_choice("orders", s, {"pairwise", "triplet", "quadruplet"});
    if (v == "pairwise") o.pairwise = true;
    if (v == "triplet") o.triplet = true;
    if (v == "quadruplet") o.quadruplet = true;
  }
  return o;
}

inline ring::WeightMode parse_weights(const RunConfig& c) {
  return to_choice("weights", c.get("weights"), {"fractional", "integer"}) == "fractional"
             ? ring::WeightMode::fractional
             : ring::WeightMode::integer;
}

inline long positive_long(const RunConfig& c, const std::string& key, long min = 1) {
  long v = to_long(key, c.get(key));
  if (v < min) throw UsageError("parameter '" + key + "' must be at least " + std::to_string(min));
  return v;
}

inline double positive_double(const RunConfig& c, const std::string& key) {
  double v = to_double(key, c.get(key));
  if (!(v > 0.0)) throw UsageError("parameter '" + key + "' must be positive");
  return v;
}

inline std::optional<long> parse_ell(const RunConfig& c) {
  if (c.get("ell") == "auto") return std::nullopt;
  long v = to_long("ell", c.get("ell"));
  if (v < 1) throw UsageError("parameter 'ell' must be positive or auto");
  return v;
}

inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline void add_verdict(json& j, const ring::EquilibriumResult& eq, std::optional<double> prediction) {
  if (eq.jacobian_leading_eigs.empty()) return;
  j["bifurcating"] = eq.bifurcating;
  j["symmetry_eig"] = eq.verdict.symmetry_eig ? num(*eq.verdict.symmetry_eig) : json(nullptr);
  j["stable"] = eq.verdict.stable;
  if (prediction) j["branch_eigenvalue_observed"] = num(ring::closest_eigenvalue(eq.verdict, *prediction));
}

inline void state_table(CsvTable& t, const ring::PhaseVector& th) {
  t.header = {"index", "x", "theta"};
  for (long k = 0; k < th.size(); ++k) t.add(k, th.x(k), th[k]);
}

// Amplitude and dominant Fourier mode of theta - Psi_q.
inline std::pair<double, long> modulation(const ring::PhaseVector& th, long q) {
  long M = th.size();
  Eigen::VectorXd d = th.values() - ring::twisted_state(M, q).values();
  std::vector<std::complex<double>> in(d.data(), d.data() + M), hat;
  Eigen::FFT<double> fft;
  fft.fwd(hat, in);
  long best = 0;
  double mag = -1.0;
  for (long m = 1; m <= M / 2; ++m) {
    double v = std::abs(hat[static_cast<std::size_t>(m)]);
    if (v > mag) {
      mag = v;
      best = m;
    }
  }
  return {0.5 * (d.maxCoeff() - d.minCoeff()), best};
}

inline std::string anchor_gamma1() { return "cubic coefficient gamma1 of the reduced bifurcation equation"; }
inline std::string anchor_gamma2() { return "parameter-slope coefficient gamma2 of the reduced bifurcation equation"; }

// Base point and coefficients for the gamma, branch and equilibrium commands.
struct CurvePlan {
  long q = 1;
  std::string at;
  std::string family;
  std::string kernel;
  long M = 1000;
  ModelSign sign = ModelSign::attractive;
  double lambda = 0.0, mu = 0.0, r = 0.1, t = 0.0, s0 = 0.0;
  std::array<double, 3> direction{1.0, 0.0, 0.0};
  std::optional<long> ell;
};

struct CurveResult {
  CurveSpec curve;
  BifurcationReport report;
  double coeff_r = 0.0;  // r at which the coefficients are evaluated
  double ring_r = 0.0;   // r of the finite ring base point (before adding s)
};

inline CurvePlan plan_curve(const RunConfig& c, long q) {
  CurvePlan p;
  p.q = q;
  p.at = to_choice("at", c.get("at"),
                   {"attractive-threshold", "repulsive-threshold", "finite-attractive-threshold",
                    "finite-repulsive-threshold", "point"});
  p.family = to_choice("family", c.get("family"), {"r-linear", "lambda-linear", "mixed-linear", "t-family"});
  p.kernel = to_choice("kernel", c.get("kernel"), {"continuum", "finite"});
  p.M = positive_long(c, "M", 4);
  p.lambda = to_double("lambda", c.get("lambda"));
  p.mu = to_double("mu", c.get("mu"));
  p.r = to_double("r", c.get("r"));
  p.t = to_double("t", c.get("t"));
  p.s0 = to_double("s0", c.get("s0"));
  auto dir = to_double_list("direction", c.get("direction"));
  if (dir.size() != 3) throw UsageError("parameter 'direction' expects three comma-separated numbers");
  p.direction = {dir[0], dir[1], dir[2]};
  p.ell = parse_ell(c);
  p.sign = (p.at == "repulsive-threshold" || p.at == "finite-repulsive-threshold") ? ModelSign::repulsive
                                                                                    : ModelSign::attractive;
  if (p.at != "point" && (p.lambda != 0.0 || p.mu != 0.0)) {
    throw UsageError("threshold base points are defined for lambda = mu = 0; use at=point");
  }
  if (p.family == "t-family" && p.at != "point") throw UsageError("the t-family needs at=point with r = r0");
  if (p.at == "point") Params{p.r, p.lambda, p.mu};
  if (p.kernel == "finite" && p.M < 20 * q) throw UsageError("finite kernels need M >= 20 q");
  return p;
}

inline CurveResult solve_curve(const CurvePlan& p) {
  CurveResult out;
  bool repulsive = p.sign == ModelSign::repulsive;
  bool finite_base = p.at.rfind("finite-", 0) == 0;
  auto continuum_r = [&] {
    return threshold(p.q, repulsive ? ThresholdKind::repulsive_r0 : ThresholdKind::attractive_r0);
  };
  auto finite_r = [&] { return ring::finite_threshold(p.q, p.M, p.sign); };

  if (p.at == "point") {
    out.coeff_r = out.ring_r = p.r;
  } else {
    out.ring_r = finite_base ? finite_r() : continuum_r();
    if (p.kernel == "finite") {
      out.coeff_r = finite_base ? out.ring_r : finite_r();
    } else {
      out.coeff_r = finite_base ? continuum_r() : out.ring_r;
    }
  }

  auto run = [&](const auto& fam) {
    CurveSpec curve;
    Params base{out.coeff_r, p.lambda, p.mu};
    if (p.family == "t-family") {
      curve = make_t_family(p.q, p.r, p.t);
    } else if (p.family == "r-linear") {
      curve = make_r_linear(p.q, base, p.ell, fam);
    } else if (p.family == "lambda-linear") {
      curve = make_lambda_linear(p.q, base, p.ell, fam);
    } else {
      curve = make_curve(CurveFamily::mixed_linear, p.q, base, p.direction, p.ell, fam);
    }
    out.curve = curve;
    out.report = gamma_pair(curve, fam, p.sign);
  };
  if (p.kernel == "finite") {
    run(ring::SampledFamily{p.M});
  } else {
    run(ContinuumFamily{});
  }
  return out;
}

inline json report_json(const BifurcationReport& r) {
  json j;
  j["ell"] = r.ell;
  j["sign"] = sign_name(r.sign);
  j["gamma1"] = num(r.gamma1);
  j["gamma2"] = num(r.gamma2);
  j["criticality"] = to_string(r.criticality);
  j["branch_side"] = to_string(r.branch_side);
  j["kappa_at_bifurcation"] = num(r.kappa_at_bifurcation);
  j["branch_eig_coefficient"] = num(r.branch_eig_coefficient);
  j["degenerate_crossing"] = r.degenerate_crossing;
  j["second_harmonic_coefficient"] = num(r.second_harmonic_coefficient);
  return j;
}

// ---------------------------------------------------------------- commands

inline ReportEnvelope run_kernel(const RunConfig& c, Context& ctx) {
  long q = positive_long(c, "q");
  long kmax = positive_long(c, "kmax", 0);
  Params p{to_double("r", c.get("r")), to_double("lambda", c.get("lambda")), to_double("mu", c.get("mu"))};
  ctx.dispatch();

  ReportEnvelope env;
  CsvTable t{"kernel", {"k", "w_hat", "c1", "c2", "c5", "c6"}, {}};
  for (long k = 0; k <= kmax; ++k) t.add(k, w_hat(p.r(), k), c1(q, k, p), c2(q, k, p), c5(q, k, p), c6(q, k, p));
  env.tables.push_back(std::move(t));
  env.results["tail_limit"] = num(tail_limit(q, p));
  auto guarded = [](auto f) -> json {
    try {
      return num(f());
    } catch (const Error&) {
      return nullptr;
    }
  };
  env.results["H"] = guarded([&] { return big_H(q, p.r()); });
  env.results["lambda0"] = guarded([&] { return lambda0(q, p.r()); });
  env.results["X"] = guarded([&] { return cap_X(q, p.r()); });
  env.provenance.push_back({"c1", "linearization eigenvalue of the q-twisted state"});
  env.plot_script = "set datafile separator ','\nplot 'kernel.csv' using 1:3 with linespoints title 'c1'\n";
  return env;
}

inline ReportEnvelope run_spectrum(const RunConfig& c, Context& ctx) {
  long q = positive_long(c, "q");
  Range rr = to_range("r", c.get("r"));
  double lambda = to_double("lambda", c.get("lambda")), mu = to_double("mu", c.get("mu"));
  double tol = positive_double(c, "tol");
  ModelSign sign = parse_sign(c);
  std::optional<long> kmax;
  if (c.get("kmax") != "auto") kmax = positive_long(c, "kmax");
  Params{rr.lo, lambda, mu};
  Params{rr.hi, lambda, mu};
  truncation_modes(q, tol);
  ctx.dispatch();

  ReportEnvelope env;
  auto sup_json = [](const SpectrumReport& s) {
    json j;
    j["r"] = s.p.r();
    j["sup_value"] = num(s.sup_value);
    j["sup_attained_at"] = s.sup_attained_at ? json(*s.sup_attained_at) : json("tail");
    j["tail"] = num(s.tail);
    j["truncation_bound"] = num(s.truncation_bound);
    j["modes"] = s.modes();
    return j;
  };
  if (rr.n == 1) {
    auto rep = spectrum_report(q, Params{rr.lo, lambda, mu}, tol, sign);
    long n = kmax ? std::min(*kmax, rep.modes()) : rep.modes();
    CsvTable t{"spectrum", {"k", "c1"}, {}};
    for (long k = 1; k <= n; ++k) t.add(k, rep.at(k));
    env.tables.push_back(std::move(t));
    env.results = sup_json(rep);
    env.results["sign"] = sign_name(sign);
    env.results["all_positive"] = all_modes_positive(q, rep.p, sign);
    env.plot_script = "set datafile separator ','\nplot 'spectrum.csv' using 1:2 with points title 'c1'\n";
  } else {
    long n = kmax.value_or(4 * q);
    GridAxis axis{rr.lo, rr.hi, rr.n};
    std::vector<SpectrumReport> reps(static_cast<std::size_t>(rr.n));
    parallel_for(reps.size(), c.threads, [&](std::size_t i) {
      reps[i] = spectrum_report(q, Params{axis.at(static_cast<long>(i)), lambda, mu}, tol, sign);
      reps[i].eigenvalues.resize(static_cast<std::size_t>(std::min<long>(n, reps[i].modes())));
    });
    CsvTable t{"spectrum_sweep", {"r", "k", "c1"}, {}};
    CsvTable s{"spectrum_sup", {"r", "sup_value", "sup_mode", "tail"}, {}};
    json arr = json::array();
    for (const auto& rep : reps) {
      for (long k = 1; k <= rep.modes(); ++k) t.add(rep.p.r(), k, rep.at(k));
      s.add(rep.p.r(), rep.sup_value, rep.sup_attained_at ? fmt(*rep.sup_attained_at) : std::string("tail"),
            rep.tail);
    }
    env.tables.push_back(std::move(t));
    env.tables.push_back(std::move(s));
    env.results["sign"] = sign_name(sign);
    env.results["points"] = rr.n;
    env.results["modes_written"] = n;
    env.plot_script =
        "set datafile separator ','\nset xlabel 'r'\nset ylabel 'c1'\n"
        "plot for [k=1:" + std::to_string(n) +
        "] 'spectrum_sweep.csv' using ($2==k?$1:1/0):3 with lines notitle\n";
  }
  env.provenance.push_back({"c1", "linearization eigenvalues of the q-twisted state"});
  return env;
}

inline ReportEnvelope run_thresholds(const RunConfig& c, Context& ctx) {
  auto qs = to_int_list("q", c.get("q"));
  for (long q : qs)
    if (q < 1) throw UsageError("parameter 'q' must be positive");
  auto kind = to_choice("kind", c.get("kind"), {"attractive", "repulsive", "r-star", "all"});
  long M = positive_long(c, "M", 0);
  if (M > 0 && M < 4) throw UsageError("parameter 'M' must be 0 or at least 4");
  ctx.dispatch();

  struct Row {
    long q;
    std::string kind;
    double value;
    std::string note;
  };
  bool strict = kind != "all" && qs.size() == 1;
  std::vector<std::vector<Row>> rows(qs.size());
  parallel_for(qs.size(), c.threads, [&](std::size_t i) {
    long q = qs[i];
    auto attempt = [&](const std::string& name, auto f) {
      try {
        rows[i].push_back({q, name, f(), ""});
      } catch (const Error& e) {
        if (strict) throw;
        rows[i].push_back({q, name, nan, std::string(to_string(e.kind()))});
      }
    };
    if (kind == "attractive" || kind == "all") attempt("attractive", [&] { return threshold(q, ThresholdKind::attractive_r0); });
    if (kind == "repulsive" || kind == "all") attempt("repulsive", [&] { return threshold(q, ThresholdKind::repulsive_r0); });
    if (kind == "r-star" || kind == "all") attempt("r-star", [&] { return threshold(q, ThresholdKind::r_star); });
    if (M > 0) {
      if (kind == "attractive" || kind == "all")
        attempt("finite-attractive", [&] { return ring::finite_threshold(q, M, ModelSign::attractive); });
      if (kind == "repulsive" || kind == "all")
        attempt("finite-repulsive", [&] { return ring::finite_threshold(q, M, ModelSign::repulsive); });
    }
  });

  ReportEnvelope env;
  CsvTable t{"thresholds", {"q", "kind", "value", "note"}, {}};
  json arr = json::array();
  for (const auto& rs : rows)
    for (const auto& r : rs) {
      t.add(r.q, r.kind, r.value, r.note);
      arr.push_back({{"q", r.q}, {"kind", r.kind}, {"value", num(r.value)}, {"note", r.note}});
    }
  env.tables.push_back(std::move(t));
  env.results["thresholds"] = arr;
  if (M > 0) env.results["M"] = M;
  env.provenance.push_back({"attractive", "first zero crossing of c1(q,1) in r"});
  env.provenance.push_back({"repulsive", "lower end of the repulsive stability window"});
  env.provenance.push_back({"r-star", "smallest r beyond which mode q carries the largest eigenvalue"});
  return env;
}

inline ReportEnvelope run_gamma(const RunConfig& c, Context& ctx) {
  auto qs = to_int_list("q", c.get("q"));
  std::vector<CurvePlan> plans;
  for (long q : qs) {
    if (q < 1) throw UsageError("parameter 'q' must be positive");
    plans.push_back(plan_curve(c, q));
  }
  ctx.dispatch();

  bool strict = qs.size() == 1;
  struct Row {
    std::optional<CurveResult> res;
    double a = nan;
    std::string note;
  };
  std::vector<Row> rows(plans.size());
  parallel_for(plans.size(), c.threads, [&](std::size_t i) {
    try {
      rows[i].res = solve_curve(plans[i]);
    } catch (const Error& e) {
      if (strict) throw;
      rows[i].note = std::string(to_string(e.kind()));
      return;
    }
    if (plans[i].s0 != 0.0) {
      try {
        rows[i].a = a_app(rows[i].res->report, plans[i].s0);
      } catch (const Error& e) {
        if (strict) throw;
        rows[i].note = std::string(to_string(e.kind()));
      }
    }
  });

  ReportEnvelope env;
  CsvTable t{"gamma",
             {"q", "r0", "ell", "gamma1", "gamma2", "ratio", "criticality", "branch_side", "kappa", "a_app", "note"},
             {}};
  json arr = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    long q = qs[i];
    if (!row.res) {
      t.add(q, nan, std::string(""), nan, nan, nan, std::string(""), std::string(""), nan, nan, row.note);
      arr.push_back({{"q", q}, {"note", row.note}});
      continue;
    }
    const auto& rep = row.res->report;
    double ratio = rep.gamma2 / (rep.gamma1 * static_cast<double>(q));
    t.add(q, row.res->coeff_r, rep.ell, rep.gamma1, rep.gamma2, ratio, std::string(to_string(rep.criticality)),
          std::string(to_string(rep.branch_side)), rep.kappa_at_bifurcation, row.a, row.note);
    json j = report_json(rep);
    j["q"] = q;
    j["r0"] = row.res->coeff_r;
    j["ratio"] = num(ratio);
    j["a_app"] = num(row.a);
    if (plans[i].s0 != 0.0 && std::isfinite(row.a)) j["branch_eigenvalue_prediction"] = num(branch_eigenvalue_prediction(rep, row.a));
    arr.push_back(j);
  }
  env.tables.push_back(std::move(t));
  if (strict) {
    env.results = arr[0];
    env.results["s0"] = plans[0].s0;
    env.results["kernel"] = plans[0].kernel;
  } else {
    env.results["curves"] = arr;
  }
  env.provenance.push_back({"gamma1", anchor_gamma1()});
  env.provenance.push_back({"gamma2", anchor_gamma2()});
  env.provenance.push_back({"a_app", "leading branch amplitude sqrt(-gamma2 s / gamma1)"});
  env.plot_script = "set datafile separator ','\nset xlabel 'q'\nplot 'gamma.csv' using 1:6 with points title 'gamma2/(gamma1 q)'\n";
  return env;
}

struct RefineOutcome {
  ring::EquilibriumResult eq;
  double e1 = nan, e2 = nan;
};

inline ReportEnvelope run_branch(const RunConfig& c, Context& ctx) {
  long q = positive_long(c, "q");
  CurvePlan plan = plan_curve(c, q);
  int order = static_cast<int>(to_long("order", c.get("order")));
  if (order != 1 && order != 2) throw UsageError("parameter 'order' must be 1 or 2");
  long grid = positive_long(c, "grid");
  bool refine = to_bool("refine", c.get("refine"));
  auto scaling = to_double_list("error_scaling", c.get("error_scaling"));
  std::optional<double> a_fixed;
  if (c.get("a") != "auto") a_fixed = to_double("a", c.get("a"));
  if ((refine || !scaling.empty()) && plan.M < 20 * q) throw UsageError("refinement needs M >= 20 q");
  ctx.dispatch();

  auto cr = solve_curve(plan);
  const auto& rep = cr.report;
  double a = a_fixed ? *a_fixed : a_app(rep, plan.s0);
  auto prof = sample_branch(q, rep.ell, a, rep.second_harmonic_coefficient, order, grid);

  ReportEnvelope env;
  CsvTable t{"branch", {"x", "psi_q", "z1", "z2"}, {}};
  for (std::size_t j = 0; j < prof.x.size(); ++j) t.add(prof.x[j], prof.psi_q[j], prof.z1[j], prof.z2[j]);
  env.tables.push_back(std::move(t));
  env.results = report_json(rep);
  env.results["q"] = q;
  env.results["r0"] = cr.coeff_r;
  env.results["kernel"] = plan.kernel;
  env.results["s0"] = plan.s0;
  env.results["a"] = num(a);
  env.results["order"] = order;
  env.results["z2_coefficient"] = num(prof.z2_coefficient);
  env.results["branch_eigenvalue_prediction"] = num(branch_eigenvalue_prediction(rep, a));
  env.provenance.push_back({"gamma1", anchor_gamma1()});
  env.provenance.push_back({"gamma2", anchor_gamma2()});
  env.provenance.push_back({"a", "leading branch amplitude sqrt(-gamma2 s / gamma1)"});
  env.provenance.push_back({"z2_coefficient", "second-harmonic correction of the branch profile"});

  const long M = plan.M;
  auto refine_at = [&](double s, double amp, bool from_z2) {
    double r = cr.ring_r + s;
    ring::SystemSpec spec{Params{r}, plan.sign, ring::Orders::pairwise_only()};
    ring::RingSystem sys(spec, ring::build_weights(M, r));
    auto b = sample_branch(q, rep.ell, amp, rep.second_harmonic_coefficient, 2, M);
    RefineOutcome out;
    out.eq = ring::newton_equilibrium(ring::from_samples(from_z2 ? b.z2 : b.z1), sys,
                                      {50, 1e-12, from_z2 ? 0L : 4L});
    out.e1 = ring::sup_distance(out.eq.theta, ring::from_samples(b.z1));
    out.e2 = ring::sup_distance(out.eq.theta, ring::from_samples(b.z2));
    return out;
  };

  if (refine) {
    auto out = refine_at(plan.s0, a, false);
    CsvTable st{"equilibrium", {}, {}};
    state_table(st, out.eq.theta);
    env.tables.push_back(std::move(st));
    json j;
    j["M"] = M;
    j["ring_r"] = cr.ring_r + plan.s0;
    j["init"] = "z1";
    j["converged"] = out.eq.converged;
    j["iterations"] = out.eq.iterations;
    j["residual"] = num(out.eq.residual_norm);
    j["symmetry_deflated"] = out.eq.symmetry_deflated;
    j["error_z1"] = num(out.e1);
    j["error_z2"] = num(out.e2);
    json eigs = json::array();
    for (double v : out.eq.jacobian_leading_eigs) eigs.push_back(num(v));
    j["jacobian_leading_eigs"] = eigs;
    add_verdict(j, out.eq, branch_eigenvalue_prediction(rep, a));
    env.results["refined"] = j;
  }

  if (!scaling.empty()) {
    std::vector<RefineOutcome> outs(scaling.size());
    std::vector<double> amps(scaling.size());
    parallel_for(scaling.size(), c.threads, [&](std::size_t i) {
      amps[i] = a_app(rep, scaling[i]);
      outs[i] = refine_at(scaling[i], amps[i], true);
    });
    CsvTable st{"error_scaling", {"s", "a_app", "iterations", "residual", "e1", "e2"}, {}};
    std::vector<double> lx, l1, l2;
    for (std::size_t i = 0; i < outs.size(); ++i) {
      st.add(scaling[i], amps[i], outs[i].eq.iterations, outs[i].eq.residual_norm, outs[i].e1, outs[i].e2);
      lx.push_back(std::log(std::abs(scaling[i])));
      l1.push_back(std::log(outs[i].e1));
      l2.push_back(std::log(outs[i].e2));
    }
    env.tables.push_back(std::move(st));
    if (outs.size() >= 2) {
      env.results["error_slope_z1"] = num(slope(lx, l1));
      env.results["error_slope_z2"] = num(slope(lx, l2));
    }
    env.provenance.push_back({"error_slope_z1", "order of the first-order branch approximation error in |s|"});
    env.provenance.push_back({"error_slope_z2", "order of the second-order branch approximation error in |s|"});
  }
  env.plot_script =
      "set datafile separator ','\nset xlabel 'x'\n"
      "plot 'branch.csv' using 1:($3-$2) with lines title 'Z1 - Psi_q', '' using 1:($4-$2) with lines title 'Z2 - Psi_q'\n";
  return env;
}

struct RingPlan {
  long q = 5;
  long M = 1000;
  std::string at;
  double r = 0.1, s = 0.0, lambda = 0.0, mu = 0.0;
  ModelSign sign = ModelSign::attractive;
  ring::Orders orders;
  ring::WeightMode weights = ring::WeightMode::fractional;
};

inline RingPlan plan_ring(const RunConfig& c) {
  RingPlan p;
  p.q = positive_long(c, "q", 0);
  p.M = positive_long(c, "M", 4);
  p.at = to_choice("at", c.get("at"), {"point", "finite-attractive-threshold", "finite-repulsive-threshold"});
  p.r = to_double("r", c.get("r"));
  p.s = to_double("s", c.get("s"));
  p.lambda = to_double("lambda", c.get("lambda"));
  p.mu = to_double("mu", c.get("mu"));
  p.sign = parse_sign(c);
  p.orders = parse_orders(c);
  p.weights = parse_weights(c);
  if (p.at == "point") Params{p.r + p.s, p.lambda, p.mu};
  if (p.at != "point" && p.M < 20 * std::max(p.q, 1L)) throw UsageError("threshold base points need M >= 20 q");
  ring::SystemSpec{Params{0.25, p.lambda, p.mu}, p.sign, p.orders}.validate();
  return p;
}

inline double ring_r(const RingPlan& p) {
  if (p.at == "point") return p.r + p.s;
  ModelSign kind = p.at == "finite-attractive-threshold" ? ModelSign::attractive : ModelSign::repulsive;
  return ring::finite_threshold(p.q, p.M, kind, {p.weights}) + p.s;
}

inline ring::RingSystem make_system(const RingPlan& p, double r) {
  return {ring::SystemSpec{Params{r, p.lambda, p.mu}, p.sign, p.orders}, ring::build_weights(p.M, r, p.weights)};
}

inline ReportEnvelope run_simulate(const RunConfig& c, Context& ctx) {
  RingPlan plan = plan_ring(c);
  double amplitude = to_double("amplitude", c.get("amplitude"));
  if (amplitude < 0.0) throw UsageError("parameter 'amplitude' must be non-negative");
  auto seeds = to_int_list("seeds", c.get("seeds"));
  ring::IntegrateOptions opt;
  opt.t_end = to_double("t_end", c.get("t_end"));
  if (opt.t_end < 0.0) throw UsageError("parameter 't_end' must be non-negative");
  opt.tol = positive_double(c, "tol");
  opt.stepper = to_choice("stepper", c.get("stepper"), {"dopri54", "rk4"}) == "rk4" ? ring::Stepper::rk4
                                                                                     : ring::Stepper::dopri54;
  if (opt.stepper == ring::Stepper::rk4) opt.h0 = positive_double(c, "h");
  opt.equilibrium_tol = positive_double(c, "equilibrium_tol");
  opt.sample_every = to_double("sample_every", c.get("sample_every"));
  bool polish = to_bool("polish", c.get("polish"));
  ctx.dispatch();

  double r = ring_r(plan);
  struct Run {
    ring::IntegrateResult integ;
    ring::PhaseVector final_state;
    double residual = 0.0;
    bool polished = false;
    double amplitude = 0.0;
    long mode = 0;
  };
  std::vector<Run> runs(seeds.size());
  parallel_for(seeds.size(), c.threads, [&](std::size_t i) {
    auto sys = make_system(plan, r);
    auto start = ring::perturb(ring::twisted_state(plan.M, plan.q), amplitude, static_cast<std::uint64_t>(seeds[i]));
    runs[i].integ = ring::integrate(start, sys, opt);
    runs[i].final_state = runs[i].integ.theta;
    runs[i].residual = runs[i].integ.residual;
    if (polish && runs[i].integ.stop != ring::StopReason::equilibrium) {
      auto eq = ring::newton_equilibrium(runs[i].final_state, sys, {50, 1e-12, 0});
      runs[i].final_state = eq.theta;
      runs[i].residual = eq.residual_norm;
      runs[i].polished = true;
    }
    auto [amp, mode] = modulation(runs[i].final_state, plan.q);
    runs[i].amplitude = amp;
    runs[i].mode = mode;
  });

  ReportEnvelope env;
  CsvTable sum{"simulate_summary",
               {"seed", "t", "stop", "steps", "rhs_evals", "polished", "residual", "amplitude", "dominant_mode",
                "shift_phi", "shift_distance"},
               {}};
  json arr = json::array();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    double phi = 0.0, dist = 0.0;
    if (i > 0) {
      auto al = ring::align_shift(runs[0].final_state, run.final_state);
      phi = al.phi;
      dist = al.distance;
    }
    sum.add(seeds[i], run.integ.t, std::string(to_string(run.integ.stop)), run.integ.steps, run.integ.rhs_evals,
            run.polished, run.residual, run.amplitude, run.mode, phi, dist);
    arr.push_back({{"seed", seeds[i]},
                   {"t", run.integ.t},
                   {"stop", to_string(run.integ.stop)},
                   {"steps", run.integ.steps},
                   {"polished", run.polished},
                   {"residual", num(run.residual)},
                   {"amplitude", num(run.amplitude)},
                   {"dominant_mode", run.mode},
                   {"shift_phi", num(phi)},
                   {"shift_distance", num(dist)}});
    CsvTable st{"state_seed" + std::to_string(seeds[i]), {}, {}};
    state_table(st, run.final_state);
    env.tables.push_back(std::move(st));
    if (!run.integ.samples.empty()) {
      CsvTable tr{"trajectory_seed" + std::to_string(seeds[i]), {"t", "index", "theta"}, {}};
      for (const auto& smp : run.integ.samples)
        for (long k = 0; k < smp.theta.size(); ++k) tr.add(smp.t, k, smp.theta[k]);
      env.tables.push_back(std::move(tr));
    }
  }
  env.tables.insert(env.tables.begin(), std::move(sum));
  auto w = ring::build_weights(plan.M, r, plan.weights);
  env.results["ring_r"] = r;
  env.results["weights_hash"] = w.hash();
  env.results["runs"] = arr;
  env.results["tolerances"] = {{"integrator", opt.tol}, {"equilibrium", opt.equilibrium_tol}};
  if (plan.at != "point" && plan.s != 0.0 && plan.orders.pairwise && !plan.orders.triplet && !plan.orders.quadruplet) {
    try {
      bool rep = plan.at == "finite-repulsive-threshold";
      double r0 = threshold(plan.q, rep ? ThresholdKind::repulsive_r0 : ThresholdKind::attractive_r0);
      auto br = gamma_pair(make_r_linear(plan.q, Params{r0}), ContinuumFamily{}, rep ? ModelSign::repulsive : ModelSign::attractive);
      env.results["predicted_amplitude"] = num(a_app(br, plan.s));
      env.results["predicted_mode"] = br.ell;
    } catch (const Error&) {
      env.results["predicted_amplitude"] = nullptr;
    }
  }
  env.provenance.push_back({"amplitude", "amplitude of the converged modulation of the twisted state"});
  env.provenance.push_back({"predicted_amplitude", "leading branch amplitude sqrt(-gamma2 s / gamma1)"});
  env.plot_script = "set datafile separator ','\nplot for [f in system('ls state_seed*.csv')] f using 2:3 with lines title f\n";
  return env;
}

inline ReportEnvelope run_equilibrium(const RunConfig& c, Context& ctx) {
  RingPlan plan = plan_ring(c);
  auto init = to_choice("init", c.get("init"), {"twisted", "z1", "z2"});
  auto ell = parse_ell(c);
  ring::NewtonOptions opt;
  opt.max_iter = positive_long(c, "max_iter");
  opt.tol = positive_double(c, "tol");
  opt.n_eigs = positive_long(c, "n_eigs", 0);
  if (init != "twisted" && plan.at == "point") {
    throw UsageError("z1/z2 initial guesses need a threshold base point (at=finite-...)");
  }
  if (init != "twisted" && (plan.lambda != 0.0 || plan.mu != 0.0)) {
    throw UsageError("z1/z2 initial guesses are available for pairwise coupling");
  }
  ctx.dispatch();

  double r = ring_r(plan);
  auto sys = make_system(plan, r);
  ReportEnvelope env;
  ring::PhaseVector start = ring::twisted_state(plan.M, plan.q);
  std::optional<BifurcationReport> rep;
  double a = 0.0;
  if (init != "twisted") {
    ring::SampledFamily fam{plan.M, plan.weights};
    auto curve = make_r_linear(plan.q, Params{r - plan.s}, ell, fam);
    rep = gamma_pair(curve, fam, plan.sign);
    a = a_app(*rep, plan.s);
    auto b = sample_branch(plan.q, rep->ell, a, rep->second_harmonic_coefficient, 2, plan.M);
    start = ring::from_samples(init == "z1" ? b.z1 : b.z2);
  }
  auto eq = ring::newton_equilibrium(start, sys, opt);
  CsvTable st{"equilibrium", {}, {}};
  state_table(st, eq.theta);
  env.tables.push_back(std::move(st));
  env.results["ring_r"] = r;
  env.results["init"] = init;
  env.results["converged"] = eq.converged;
  env.results["iterations"] = eq.iterations;
  env.results["residual"] = num(eq.residual_norm);
  env.results["symmetry_deflated"] = eq.symmetry_deflated;
  json eigs = json::array();
  for (double v : eq.jacobian_leading_eigs) eigs.push_back(num(v));
  env.results["jacobian_leading_eigs"] = eigs;
  add_verdict(env.results, eq, rep ? std::optional<double>{branch_eigenvalue_prediction(*rep, a)} : std::nullopt);
  auto [amp, mode] = modulation(eq.theta, plan.q);
  env.results["amplitude"] = num(amp);
  env.results["dominant_mode"] = mode;
  if (rep) {
    env.results["bifurcation"] = report_json(*rep);
    env.results["a_app"] = num(a);
    env.results["branch_eigenvalue_prediction"] = num(branch_eigenvalue_prediction(*rep, a));
  }
  env.results["weights_hash"] = sys.weights().hash();
  env.provenance.push_back({"jacobian_leading_eigs", "leading eigenvalues of the pinned finite-ring Jacobian"});
  env.plot_script = "set datafile separator ','\nplot 'equilibrium.csv' using 2:3 with lines title 'theta'\n";
  return env;
}

inline ReportEnvelope run_stability_map(const RunConfig& c, Context& ctx) {
  long q = positive_long(c, "q");
  Range rr = to_range("r", c.get("r")), lr = to_range("lambda", c.get("lambda"));
  if (rr.n < 2 || lr.n < 2) throw UsageError("stability-map axes need lo:hi:n with n >= 2");
  if (rr.n * lr.n > 4'000'000) throw UsageError("stability-map grid is too large");
  Params{rr.lo};
  Params{rr.hi};
  double tol = positive_double(c, "tol");
  ctx.dispatch();

  auto map = stability_map(q, {rr.lo, rr.hi, rr.n}, {lr.lo, lr.hi, lr.n}, c.threads, tol);
  double rstar = threshold(q, ThresholdKind::r_star);

  ReportEnvelope env;
  CsvTable g{"stability_map", {"r", "lambda", "max_eig"}, {}};
  for (long i = 0; i < rr.n; ++i)
    for (long j = 0; j < lr.n; ++j) g.add(map.r_axis.at(i), map.lambda_axis.at(j), map.at(i, j));
  CsvTable b{"boundary", {"r", "lambda", "grid_cell", "ell", "criticality", "gamma1", "gamma2", "lambda0", "flag"}, {}};
  long agree = 0, compared = 0;
  for (const auto& bp : map.boundary) {
    double l0 = nan;
    try {
      l0 = lambda0(q, bp.r);
    } catch (const Error&) {
    }
    std::string cls = bp.flag.empty() ? to_string(bp.criticality) : "";
    b.add(bp.r, bp.lambda, bp.grid_cell ? fmt(*bp.grid_cell) : std::string(""), bp.ell ? fmt(*bp.ell) : std::string(""),
          cls, bp.gamma1, bp.gamma2, l0, bp.flag);
    if (bp.r > rstar && bp.grid_cell && std::isfinite(l0)) {
      ++compared;
      double lo = map.lambda_axis.at(*bp.grid_cell), hi = map.lambda_axis.at(*bp.grid_cell + 1);
      double h = map.lambda_axis.step();
      if (l0 >= lo - h && l0 <= hi + h) ++agree;
    }
  }
  env.tables.push_back(std::move(g));
  env.tables.push_back(std::move(b));
  env.results["q"] = q;
  env.results["r_star"] = rstar;
  env.results["contour_columns_beyond_r_star"] = compared;
  env.results["contour_columns_matching_lambda0"] = agree;
  env.provenance.push_back({"max_eig", "maximal eigenvalue of the q-twisted state"});
  env.provenance.push_back({"lambda0", "triplet strength at which mode q crosses zero"});
  env.plot_script =
      "set datafile separator ','\nset xlabel 'r'\nset ylabel 'lambda'\nset view map\n"
      "splot 'stability_map.csv' using 1:2:3 with image notitle\n";
  return env;
}

inline ReportEnvelope run_iota(const RunConfig& c, Context& ctx) {
  double from = to_double("from", c.get("from")), to = to_double("to", c.get("to"));
  long steps = positive_long(c, "steps");
  if (from < 0.0 || !(to > from)) throw UsageError("iota needs 0 <= from < to");
  ctx.dispatch();

  ReportEnvelope env;
  CsvTable t{"iota", {"upsilon", "iota"}, {}};
  json singular = json::array();
  double u0 = upsilon0();
  bool positive = true;
  double min_above = std::numeric_limits<double>::infinity();
  for (long i = 0; i <= steps; ++i) {
    double u = from + (to - from) * static_cast<double>(i) / static_cast<double>(steps);
    try {
      double v = iota(u);
      t.add(u, v);
      if (u >= u0) {
        positive = positive && v > 0.0;
        min_above = std::min(min_above, v);
      }
    } catch (const Error&) {
      singular.push_back(u);
    }
  }
  env.tables.push_back(std::move(t));
  env.results["upsilon0"] = u0;
  env.results["positive_for_upsilon_ge_upsilon0"] = positive;
  env.results["min_iota_for_upsilon_ge_upsilon0"] = num(min_above);
  env.results["singular_points"] = singular;
  env.provenance.push_back({"iota", "scaling function with X(q,r) = iota(q r) / q"});
  env.provenance.push_back({"upsilon0", "root of 2 = 2 pi u - sin(2 pi u)"});
  env.plot_script = "set datafile separator ','\nplot 'iota.csv' using 1:2 with lines title 'iota'\n";
  return env;
}

}  // namespace detail

inline ReportEnvelope execute(const RunConfig& cfg, Context& ctx) {
  ReportEnvelope env;
  const auto& cmd = cfg.command;
  if (cmd == "kernel") env = detail::run_kernel(cfg, ctx);
  else if (cmd == "spectrum") env = detail::run_spectrum(cfg, ctx);
  else if (cmd == "thresholds") env = detail::run_thresholds(cfg, ctx);
  else if (cmd == "gamma") env = detail::run_gamma(cfg, ctx);
  else if (cmd == "branch") env = detail::run_branch(cfg, ctx);
  else if (cmd == "simulate") env = detail::run_simulate(cfg, ctx);
  else if (cmd == "equilibrium") env = detail::run_equilibrium(cfg, ctx);
  else if (cmd == "stability-map") env = detail::run_stability_map(cfg, ctx);
  else if (cmd == "iota") env = detail::run_iota(cfg, ctx);
  else throw UsageError("unknown command '" + cmd + "'");
  env.config_echo = echo(cfg);
  return env;
}

}  // namespace twistlab::app

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "twistlab/ring/jacobian.hpp"
#include "twistlab/ring/phase.hpp"

namespace twistlab::ring {

struct NewtonOptions {
  long max_iter = 50;
  double tol = 1e-12;
  long n_eigs = 6;           // leading Jacobian eigenvalues to report; 0 skips the eigensolve
  double cond_limit = 1e12;  // beyond this the step uses the minimum-norm solution
};

// Leading eigenvalues with the near-zero rotation-symmetry eigenvalue of a
// bifurcating equilibrium (|eig| < 10/M) removed.
struct SpectrumVerdict {
  std::vector<double> eigs;
  std::optional<double> symmetry_eig;
  bool stable = false;
};

inline SpectrumVerdict classify_spectrum(const std::vector<double>& eigs, long M, bool bifurcating) {
  SpectrumVerdict v;
  std::size_t drop = eigs.size();
  if (bifurcating) {
    double smallest = 10.0 / static_cast<double>(M);
    for (std::size_t i = 0; i < eigs.size(); ++i) {
      if (std::abs(eigs[i]) < smallest) {
        smallest = std::abs(eigs[i]);
        drop = i;
      }
    }
  }
  for (std::size_t i = 0; i < eigs.size(); ++i) {
    if (i == drop) {
      v.symmetry_eig = eigs[i];
    } else {
      v.eigs.push_back(eigs[i]);
    }
  }
  v.stable = !v.eigs.empty() && v.eigs.front() < 0.0;
  return v;
}

inline double closest_eigenvalue(const SpectrumVerdict& v, double target) {
  double best = std::numeric_limits<double>::quiet_NaN();
  for (double e : v.eigs)
    if (std::isnan(best) || std::abs(e - target) < std::abs(best - target)) best = e;
  return best;
}

struct EquilibriumResult {
  PhaseVector theta;
  double residual_norm = 0.0;
  long iterations = 0;
  bool converged = false;
  bool symmetry_deflated = false;  // a rank-one symmetry direction was projected out
  std::vector<double> jacobian_leading_eigs;
  bool bifurcating = false;  // differs from the twisted state of the same winding number
  SpectrumVerdict verdict;
};

namespace detail {

// Newton step for J d = -f. A near-singular Jacobian with a one-dimensional
// null space (the continuous rotation family of bifurcating equilibria) is
// handled by the minimum-norm solution, which moves orthogonally to the family.
inline Eigen::VectorXd newton_step(const Eigen::MatrixXd& J, const Eigen::VectorXd& f, double cond_limit,
                                   bool& deflated) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
  if (lu.rcond() * cond_limit >= 1.0) return lu.solve(-f);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1.0 / cond_limit);
  cod.compute(J);
  if (cod.rank() < J.rows() - 1) {
    std::ostringstream os;
    os << "Jacobian rank " << cod.rank() << " of " << J.rows()
       << " is degenerate beyond the rotation symmetry; try a different initial phase of the branch";
    fail(ErrorKind::near_symmetry_degenerate, os.str());
  }
  deflated = true;
  return cod.solve(-f);
}

}  // namespace detail

inline EquilibriumResult newton_equilibrium(const PhaseVector& init, const RingSystem& sys,
                                            const NewtonOptions& opt = {}) {
  require(opt.tol > 0.0, "Newton tolerance must be positive");
  require(init.size() == sys.size(), "phase vector size does not match the system");
  const long n = sys.size() - 1;

  EquilibriumResult res;
  Eigen::VectorXd theta = init.values();
  Eigen::VectorXd F = sys.rhs(theta);
  double norm = F.lpNorm<Eigen::Infinity>();

  while (norm >= opt.tol && res.iterations < opt.max_iter) {
    Eigen::MatrixXd J = pinned_jacobian(sys, theta);
    Eigen::VectorXd d = detail::newton_step(J, F.tail(n), opt.cond_limit, res.symmetry_deflated);
    double step = 1.0;
    Eigen::VectorXd trial = theta;
    Eigen::VectorXd Ft;
    double nt = norm;
    int halvings = 0;
    for (; halvings <= 30; ++halvings) {
      trial.tail(n) = theta.tail(n) + step * d;
      Ft = sys.rhs(trial);
      nt = Ft.lpNorm<Eigen::Infinity>();
      if (nt < norm) break;
      step *= 0.5;
    }
    ++res.iterations;
    if (halvings > 30) break;
    theta = trial;
    F = Ft;
    norm = nt;
  }

  res.theta = PhaseVector(theta);
  res.residual_norm = norm;
  res.converged = norm < opt.tol;
  res.bifurcating = sup_distance(res.theta, twisted_state(res.theta.size(), winding_number(res.theta))) > 1e-8;
  if (opt.n_eigs > 0) {
    res.jacobian_leading_eigs = jacobian_spectrum(sys, theta, opt.n_eigs);
    res.verdict = classify_spectrum(res.jacobian_leading_eigs, sys.size(), res.bifurcating);
  }
  return res;
}

}  // namespace twistlab::ring

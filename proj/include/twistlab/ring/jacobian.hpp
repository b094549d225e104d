#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/FFT>

#include "twistlab/ring/rhs.hpp"

namespace twistlab::ring {

inline constexpr double jacobian_fd_step = 1e-6;
inline constexpr long dense_eigen_cap = 2000;

namespace detail {

inline bool has_higher_orders(const RingSystem& sys) {
  const auto& s = sys.spec();
  return (s.orders.triplet && s.p.lambda() != 0.0) || (s.orders.quadruplet && s.p.mu() != 0.0);
}

// Full M x M Jacobian of the unpinned dynamics.
inline Eigen::MatrixXd full_jacobian(const RingSystem& sys, const Eigen::VectorXd& theta) {
  const long M = sys.size();
  const auto& w = sys.weights();
  const double sigma = sign_factor(sys.spec().sign);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(M, M);
  if (sys.spec().orders.pairwise) {
    const double c = sigma / static_cast<double>(M);
    for (long k = 0; k < M; ++k) {
      double diag = 0.0;
      for (long j = 0; j < M; ++j) {
        if (j == k) continue;
        double bkj = w[k - j];
        if (bkj == 0.0) continue;
        double v = c * bkj * std::cos(theta[j] - theta[k]);
        J(k, j) = v;
        diag -= v;
      }
      J(k, k) = diag;
    }
  }
  if (has_higher_orders(sys)) {
    const double h = jacobian_fd_step;
    Orders higher{false, true, true};
    Eigen::VectorXd t = theta;
    for (long j = 0; j < M; ++j) {
      t[j] = theta[j] + h;
      Eigen::VectorXd gp = sys.full_rhs(t, RhsMethod::fft, higher);
      t[j] = theta[j] - h;
      Eigen::VectorXd gm = sys.full_rhs(t, RhsMethod::fft, higher);
      t[j] = theta[j];
      J.col(j) += (gp - gm) / (2.0 * h);
    }
  }
  return J;
}

}  // namespace detail

// (M-1) x (M-1) Jacobian of the pinned system in coordinates 1..M-1.
inline Eigen::MatrixXd pinned_jacobian(const RingSystem& sys, const Eigen::VectorXd& theta) {
  require(theta.size() == sys.size(), "phase vector size does not match the system");
  Eigen::MatrixXd J = detail::full_jacobian(sys, theta);
  const long n = sys.size() - 1;
  Eigen::MatrixXd P = J.bottomRightCorner(n, n);
  P.rowwise() -= J.row(0).tail(n);
  return P;
}

// Real parts of the pinned Jacobian's eigenvalues, descending.
inline std::vector<double> jacobian_spectrum(const RingSystem& sys, const Eigen::VectorXd& theta, long n_eigs = -1,
                                             long cap = dense_eigen_cap) {
  if (sys.size() - 1 > cap) {
    fail(ErrorKind::resource, "Jacobian dimension exceeds the dense eigensolver cap");
  }
  Eigen::MatrixXd J = pinned_jacobian(sys, theta);
  Eigen::EigenSolver<Eigen::MatrixXd> es(J, false);
  if (es.info() != Eigen::Success) fail(ErrorKind::non_convergence, "dense eigensolver failed");
  std::vector<double> re(static_cast<std::size_t>(J.rows()));
  for (long i = 0; i < J.rows(); ++i) re[static_cast<std::size_t>(i)] = es.eigenvalues()[i].real();
  std::sort(re.begin(), re.end(), std::greater<>());
  if (n_eigs >= 0 && static_cast<std::size_t>(n_eigs) < re.size()) re.resize(static_cast<std::size_t>(n_eigs));
  return re;
}

// Eigenvalues of the pinned Jacobian at the q-twisted state, indexed by
// Fourier mode m = 1..M-1 (entry m-1). The unpinned Jacobian is circulant
// there, so one column determines the spectrum; mode 0 is the removed
// phase-shift direction.
inline std::vector<double> twisted_spectrum(const RingSystem& sys, long q) {
  const long M = sys.size();
  const auto& w = sys.weights();
  const double sigma = sign_factor(sys.spec().sign);
  PhaseVector tw = twisted_state(M, q);
  std::vector<std::complex<double>> col(static_cast<std::size_t>(M), 0.0);
  if (sys.spec().orders.pairwise) {
    const double c = sigma / static_cast<double>(M);
    double diag = 0.0;
    for (long d = 1; d < M; ++d) {
      double v = c * w[d] * std::cos(tw[0] - tw[d]);
      col[static_cast<std::size_t>(d)] += v;
      diag -= v;
    }
    col[0] += diag;
  }
  if (detail::has_higher_orders(sys)) {
    const double h = jacobian_fd_step;
    Orders higher{false, true, true};
    Eigen::VectorXd t = tw.values();
    t[0] = h;
    Eigen::VectorXd gp = sys.full_rhs(t, RhsMethod::fft, higher);
    t[0] = -h;
    Eigen::VectorXd gm = sys.full_rhs(t, RhsMethod::fft, higher);
    for (long d = 0; d < M; ++d) col[static_cast<std::size_t>(d)] += (gp[d] - gm[d]) / (2.0 * h);
  }
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> hat;
  fft.fwd(hat, col);
  std::vector<double> out(static_cast<std::size_t>(M - 1));
  for (long m = 1; m < M; ++m) out[static_cast<std::size_t>(m - 1)] = hat[static_cast<std::size_t>(m)].real();
  return out;
}

inline double leading_twisted_eigenvalue(const RingSystem& sys, long q) {
  auto s = twisted_spectrum(sys, q);
  return *std::max_element(s.begin(), s.end());
}

}  // namespace twistlab::ring

#pragma once

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "twistlab/kernel.hpp"
#include "twistlab/ring/phase.hpp"
#include "twistlab/ring/weights.hpp"

namespace twistlab::ring {

struct Orders {
  bool pairwise = true;
  bool triplet = false;
  bool quadruplet = false;

  static Orders all() { return {true, true, true}; }
  static Orders pairwise_only() { return {true, false, false}; }
};

struct SystemSpec {
  Params p{0.25};
  ModelSign sign = ModelSign::attractive;
  Orders orders{};

  void validate() const {
    if (sign == ModelSign::repulsive) {
      require(orders.pairwise && !orders.triplet && !orders.quadruplet,
              "the repulsive model is defined for pairwise coupling only");
    }
  }
};

enum class RhsMethod { naive, fft };

// Right-hand side of the finite ring in phase-difference form. The object
// caches FFT plans, so a single instance must not be shared across threads.
class RingSystem {
 public:
  RingSystem(SystemSpec spec, CouplingWeights weights) : spec_(spec), w_(std::move(weights)) {
    spec_.validate();
    M_ = w_.M;
    std::vector<cplx> b(w_.b.begin(), w_.b.end());
    fft_.fwd(b_hat_, b);
  }

  const SystemSpec& spec() const { return spec_; }
  const CouplingWeights& weights() const { return w_; }
  long size() const { return M_; }

  // Unpinned dynamics G_k of the absolute phases, scaled by the model sign.
  Eigen::VectorXd full_rhs(const Eigen::VectorXd& theta, RhsMethod method = RhsMethod::fft,
                           Orders orders = {true, true, true}) const {
    check_size(theta);
    Orders use{spec_.orders.pairwise && orders.pairwise, spec_.orders.triplet && orders.triplet,
               spec_.orders.quadruplet && orders.quadruplet};
    Eigen::VectorXd g = Eigen::VectorXd::Zero(M_);
    if (method == RhsMethod::fft) {
      fft_terms(theta, use, g);
    } else {
      naive_terms(theta, use, g);
    }
    return sign_factor(spec_.sign) * g;
  }

  // Pinned right-hand side F_k = G_k - G_0; entry 0 is exactly zero.
  Eigen::VectorXd rhs(const Eigen::VectorXd& theta, RhsMethod method = RhsMethod::fft) const {
    Eigen::VectorXd g = full_rhs(theta, method);
    g.array() -= g[0];
    g[0] = 0.0;
    return g;
  }

  Eigen::VectorXd rhs(const PhaseVector& theta, RhsMethod method = RhsMethod::fft) const {
    return rhs(theta.values(), method);
  }

  // Evaluates both methods and raises a consistency error if they disagree.
  Eigen::VectorXd rhs_checked(const Eigen::VectorXd& theta, double tol = 1e-9) const {
    Eigen::VectorXd a = rhs(theta, RhsMethod::fft);
    Eigen::VectorXd b = rhs(theta, RhsMethod::naive);
    double scale = std::max(b.lpNorm<Eigen::Infinity>(), 1e-300);
    double diff = (a - b).lpNorm<Eigen::Infinity>();
    if (diff > tol * scale && diff > 1e-14) {
      std::ostringstream os;
      os << "fft and naive right-hand sides disagree: sup diff " << diff << " vs scale " << scale;
      fail(ErrorKind::consistency, os.str());
    }
    return a;
  }

 private:
  using cplx = std::complex<double>;

  void check_size(const Eigen::VectorXd& theta) const {
    require(theta.size() == M_, "phase vector size does not match the coupling weights");
  }

  static long mod(long i, long M) {
    long r = i % M;
    return r < 0 ? r + M : r;
  }

  // Circular convolution (b * v)_k = sum_j b_{k-j} v_j via the cached b_hat.
  std::vector<cplx> convolve_b(std::vector<cplx> v_hat) const {
    for (long m = 0; m < M_; ++m) v_hat[static_cast<std::size_t>(m)] *= b_hat_[static_cast<std::size_t>(m)];
    std::vector<cplx> out;
    fft_.inv(out, v_hat);
    return out;
  }

  void fft_terms(const Eigen::VectorXd& theta, Orders use, Eigen::VectorXd& g) const {
    const double Md = static_cast<double>(M_);
    std::vector<cplx> u(static_cast<std::size_t>(M_)), u_hat;
    for (long k = 0; k < M_; ++k) u[static_cast<std::size_t>(k)] = std::polar(1.0, theta[k]);
    fft_.fwd(u_hat, u);

    if (use.pairwise) {
      auto bu = convolve_b(u_hat);
      for (long k = 0; k < M_; ++k) {
        auto i = static_cast<std::size_t>(k);
        g[k] += std::imag(std::conj(u[i]) * bu[i]) / Md;
      }
    }
    if (use.triplet && spec_.p.lambda() != 0.0) {
      std::vector<cplx> s_hat(u_hat.size());
      for (std::size_t m = 0; m < u_hat.size(); ++m) s_hat[m] = u_hat[m] * u_hat[m];
      auto bs = convolve_b(std::move(s_hat));
      double c = spec_.p.lambda() / (Md * Md);
      for (long k = 0; k < M_; ++k) {
        auto i = static_cast<std::size_t>(k);
        cplx uc = std::conj(u[i]);
        g[k] += c * std::imag(uc * uc * bs[static_cast<std::size_t>(mod(2 * k, M_))]);
      }
    }
    if (use.quadruplet && spec_.p.mu() != 0.0) {
      std::vector<cplx> p_hat(u_hat.size());
      for (std::size_t m = 0; m < u_hat.size(); ++m) p_hat[m] = u_hat[m] * u_hat[m] * std::conj(u_hat[m]);
      auto bp = convolve_b(std::move(p_hat));
      double c = spec_.p.mu() / (Md * Md * Md);
      for (long k = 0; k < M_; ++k) {
        auto i = static_cast<std::size_t>(k);
        g[k] += c * std::imag(std::conj(u[i]) * bp[i]);
      }
    }
  }

  // Direct sums; the triplet and quadruplet paths precompute one inner
  // convolution by direct summation, leaving O(M^2) and O(M^3) outer sums.
  void naive_terms(const Eigen::VectorXd& theta, Orders use, Eigen::VectorXd& g) const {
    const long M = M_;
    const double Md = static_cast<double>(M);
    std::vector<cplx> u(static_cast<std::size_t>(M));
    for (long k = 0; k < M; ++k) u[static_cast<std::size_t>(k)] = std::polar(1.0, theta[k]);

    if (use.pairwise) {
      for (long k = 0; k < M; ++k) {
        double acc = 0.0;
        for (long j = 0; j < M; ++j) acc += w_[k - j] * std::sin(theta[j] - theta[k]);
        g[k] += acc / Md;
      }
    }
    if (use.triplet && spec_.p.lambda() != 0.0) {
      std::vector<cplx> s(static_cast<std::size_t>(M), cplx{});
      for (long j = 0; j < M; ++j)
        for (long l = 0; l < M; ++l) s[static_cast<std::size_t>(mod(j + l, M))] += u[static_cast<std::size_t>(j)] * u[static_cast<std::size_t>(l)];
      double c = spec_.p.lambda() / (Md * Md);
      for (long k = 0; k < M; ++k) {
        cplx acc{};
        for (long n = 0; n < M; ++n) acc += w_[n - 2 * k] * s[static_cast<std::size_t>(n)];
        cplx uc = std::conj(u[static_cast<std::size_t>(k)]);
        g[k] += c * std::imag(uc * uc * acc);
      }
    }
    if (use.quadruplet && spec_.p.mu() != 0.0) {
      std::vector<cplx> s(static_cast<std::size_t>(M), cplx{});
      for (long j = 0; j < M; ++j)
        for (long l = 0; l < M; ++l)
          s[static_cast<std::size_t>(mod(j - l, M))] += u[static_cast<std::size_t>(j)] * std::conj(u[static_cast<std::size_t>(l)]);
      double c = spec_.p.mu() / (Md * Md * Md);
      for (long k = 0; k < M; ++k) {
        cplx acc{};
        for (long n = 0; n < M; ++n) {
          cplx inner{};
          for (long m = 0; m < M; ++m) inner += w_[n + m - k] * u[static_cast<std::size_t>(m)];
          acc += s[static_cast<std::size_t>(n)] * inner;
        }
        g[k] += c * std::imag(std::conj(u[static_cast<std::size_t>(k)]) * acc);
      }
    }
  }

  SystemSpec spec_;
  CouplingWeights w_;
  long M_ = 0;
  std::vector<cplx> b_hat_;
  mutable Eigen::FFT<double> fft_;
};

}  // namespace twistlab::ring

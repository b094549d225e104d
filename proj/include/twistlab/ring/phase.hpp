#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <unsupported/Eigen/FFT>

#include "twistlab/kernel.hpp"

namespace twistlab::ring {

// Phase differences theta_k = phi_k - phi_0, stored unwrapped, entry 0 pinned to 0.
class PhaseVector {
 public:
  PhaseVector() = default;

  // Re-pins by subtracting the first entry.
  explicit PhaseVector(Eigen::VectorXd theta) : theta_(std::move(theta)) {
    require(theta_.size() >= 1, "phase vector must not be empty");
    theta_.array() -= theta_[0];
    theta_[0] = 0.0;
  }

  long size() const { return static_cast<long>(theta_.size()); }
  double operator[](long k) const { return theta_[k]; }
  const Eigen::VectorXd& values() const { return theta_; }

  double x(long k) const { return static_cast<double>(k) / static_cast<double>(size()); }

 private:
  Eigen::VectorXd theta_;
};

inline PhaseVector twisted_state(long M, long q) {
  require(M >= 1 && q >= 0, "twisted_state requires M >= 1 and q >= 0");
  Eigen::VectorXd t(M);
  for (long k = 0; k < M; ++k) t[k] = two_pi * static_cast<double>(q) * static_cast<double>(k) / static_cast<double>(M);
  return PhaseVector(std::move(t));
}

inline PhaseVector from_samples(const std::vector<double>& values) {
  return PhaseVector(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<long>(values.size())));
}

// Number of turns of an unwrapped profile around the ring.
inline long winding_number(const PhaseVector& theta) {
  long M = theta.size();
  double closing = theta[0] - theta[M - 1];
  double wrapped = closing - two_pi * std::round(closing / two_pi);
  return std::lround((theta[M - 1] - theta[0] + wrapped) / two_pi);
}

// Cyclic index shift by j with re-pinning; unwrapped values stay continuous.
inline PhaseVector symmetry_shift(const PhaseVector& theta, long j) {
  long M = theta.size();
  require(j >= 0 && j < M, "shift index must lie in [0, M)");
  double turn = two_pi * static_cast<double>(winding_number(theta));
  Eigen::VectorXd out(M);
  for (long k = 0; k < M; ++k) {
    long i = k + j;
    out[k] = i < M ? theta[i] : theta[i - M] + turn;
  }
  return PhaseVector(std::move(out));
}

// Continuous rotation (B_phi f)(x) = f(x + phi) - f(phi), using trigonometric
// interpolation of the periodic part theta - 2 pi q x.
inline PhaseVector continuous_shift(const PhaseVector& theta, double phi) {
  long M = theta.size();
  long q = winding_number(theta);
  std::vector<std::complex<double>> per(static_cast<std::size_t>(M)), hat;
  for (long k = 0; k < M; ++k) per[static_cast<std::size_t>(k)] = theta[k] - two_pi * static_cast<double>(q) * theta.x(k);
  Eigen::FFT<double> fft;
  fft.fwd(hat, per);
  for (long m = 0; m < M; ++m) {
    long freq = m <= M / 2 ? m : m - M;
    std::complex<double> rot = std::polar(1.0, two_pi * static_cast<double>(freq) * phi);
    if (2 * m == M) rot = std::cos(two_pi * static_cast<double>(freq) * phi);
    hat[static_cast<std::size_t>(m)] *= rot;
  }
  std::vector<std::complex<double>> shifted;
  fft.inv(shifted, hat);
  Eigen::VectorXd out(M);
  for (long k = 0; k < M; ++k) {
    out[k] = shifted[static_cast<std::size_t>(k)].real() + two_pi * static_cast<double>(q) * (theta.x(k) + phi);
  }
  return PhaseVector(std::move(out));
}

inline double sup_distance(const PhaseVector& a, const PhaseVector& b) {
  require(a.size() == b.size(), "phase vectors differ in size");
  return (a.values() - b.values()).lpNorm<Eigen::Infinity>();
}

struct ShiftAlignment {
  double phi = 0.0;
  double distance = 0.0;
};

// Rotation phi in [0, 1) minimising the sup distance between B_phi a and b.
inline ShiftAlignment align_shift(const PhaseVector& a, const PhaseVector& b, long samples = 0) {
  require(a.size() == b.size(), "phase vectors differ in size");
  long M = a.size();
  if (samples <= 0) samples = 4 * M;
  auto dist = [&](double phi) { return sup_distance(continuous_shift(a, phi), b); };
  double best_phi = 0.0, best = dist(0.0);
  for (long i = 1; i < samples; ++i) {
    double phi = static_cast<double>(i) / static_cast<double>(samples);
    double d = dist(phi);
    if (d < best) {
      best = d;
      best_phi = phi;
    }
  }
  double h = 1.0 / static_cast<double>(samples);
  auto [phi, d] = boost::math::tools::brent_find_minima(dist, best_phi - h, best_phi + h, 52);
  if (d < best) {
    best = d;
    best_phi = phi - std::floor(phi);
    if (best_phi >= 1.0) best_phi = 0.0;
  }
  return {best_phi, best};
}

// Adds iid uniform(-amplitude, amplitude) noise to entries 1..M-1.
inline PhaseVector perturb(const PhaseVector& theta, double amplitude, std::uint64_t seed) {
  require(amplitude >= 0.0, "perturbation amplitude must be non-negative");
  Eigen::VectorXd out = theta.values();
  if (amplitude == 0.0) return PhaseVector(std::move(out));
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(-amplitude, amplitude);
  for (long k = 1; k < theta.size(); ++k) out[k] += dist(gen);
  return PhaseVector(std::move(out));
}

}  // namespace twistlab::ring

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <memory>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "twistlab/kernel.hpp"

namespace twistlab::ring {

enum class WeightMode { fractional, integer };

// Coupling weights b_d indexed by circular offset d in [0, M).
struct CouplingWeights {
  long M = 0;
  double r = 0.0;
  WeightMode mode = WeightMode::fractional;
  long k0 = 0;                 // floor(r M)
  long fractional_at = -1;     // circular distance of the fractional entry, -1 if none
  std::vector<double> b;

  double operator[](long d) const {
    long i = d % M;
    if (i < 0) i += M;
    return b[static_cast<std::size_t>(i)];
  }

  double sum() const {
    double s = 0.0;
    for (double v : b) s += v;
    return s;
  }

  // FNV-1a over the bit patterns; identifies the weights in run manifests.
  std::uint64_t hash() const {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= 1099511628211ull;
      }
    };
    mix(static_cast<std::uint64_t>(M));
    for (double v : b) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      mix(bits);
    }
    return h;
  }
};

inline CouplingWeights build_weights(long M, double r, WeightMode mode = WeightMode::fractional) {
  require(M >= 4, "ring size M must be at least 4");
  Params{r};
  CouplingWeights w;
  w.M = M;
  w.r = r;
  w.mode = mode;
  double rM = r * static_cast<double>(M);
  w.k0 = static_cast<long>(std::floor(rM));
  double frac = rM - static_cast<double>(w.k0);
  long half = M / 2;
  // The fractional entry is dropped when its distance would wrap past M/2.
  if (mode == WeightMode::fractional && frac > 0.0 && w.k0 + 1 <= half) w.fractional_at = w.k0 + 1;
  w.b.assign(static_cast<std::size_t>(M), 0.0);
  for (long d = 0; d < M; ++d) {
    long dist = std::min(d, M - d);
    double v = 0.0;
    if (dist <= w.k0) {
      v = 1.0;
    } else if (dist == w.fractional_at) {
      v = frac;
    }
    w.b[static_cast<std::size_t>(d)] = v;
  }
  return w;
}

// Discrete Fourier coefficients W^M(k) = (2/M) sum_d b_d cos(2 pi k d / M),
// the finite-ring counterpart of w_hat.
class SampledKernel {
 public:
  explicit SampledKernel(const CouplingWeights& w) : M_(w.M), frac_at_(w.fractional_at) {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> in(w.b.begin(), w.b.end()), out;
    fft.fwd(out, in);
    auto hat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(M_));
    for (long k = 0; k < M_; ++k) {
      (*hat)[static_cast<std::size_t>(k)] = 2.0 * out[static_cast<std::size_t>(k)].real() / static_cast<double>(M_);
    }
    hat_ = std::move(hat);
    if (w.mode == WeightMode::integer) frac_at_ = -1;
    // A distance-M/2 entry occurs once instead of twice.
    dr_scale_ = (2 * frac_at_ == M_) ? 2.0 : 4.0;
  }

  long period() const { return M_; }

  double coefficient(long k) const { return (*hat_)[static_cast<std::size_t>(wrap(k))]; }

  double coefficient_dr(long k) const {
    if (frac_at_ < 0) return 0.0;
    return dr_scale_ * std::cos(two_pi * static_cast<double>(wrap(k) * frac_at_ % M_) / static_cast<double>(M_));
  }

 private:
  long wrap(long k) const {
    long i = k % M_;
    return i < 0 ? i + M_ : i;
  }

  long M_;
  long frac_at_;
  double dr_scale_ = 4.0;
  std::shared_ptr<const std::vector<double>> hat_;
};

struct SampledFamily {
  long M;
  WeightMode mode = WeightMode::fractional;

  SampledKernel at(double r) const { return SampledKernel(build_weights(M, r, mode)); }
  long period() const { return M; }
};

}  // namespace twistlab::ring

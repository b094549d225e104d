#pragma once

#include "twistlab/ring/integrate.hpp"
#include "twistlab/ring/jacobian.hpp"
#include "twistlab/ring/newton.hpp"
#include "twistlab/ring/phase.hpp"
#include "twistlab/ring/rhs.hpp"
#include "twistlab/ring/threshold.hpp"
#include "twistlab/ring/weights.hpp"

namespace twistlab::ring {

inline Eigen::VectorXd rhs(const PhaseVector& theta, const SystemSpec& spec, const CouplingWeights& weights,
                           RhsMethod method = RhsMethod::fft) {
  return RingSystem(spec, weights).rhs(theta, method);
}

}  // namespace twistlab::ring

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace twistlab {

enum class ErrorKind {
  argument,
  degenerate_kernel,
  singular_point,
  no_bifurcation,
  no_threshold,
  resonance,
  branch_absent,
  near_symmetry_degenerate,
  non_convergence,
  stiffness,
  resource,
  consistency,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::degenerate_kernel: return "degenerate_kernel";
    case ErrorKind::singular_point: return "singular_point";
    case ErrorKind::no_bifurcation: return "no_bifurcation";
    case ErrorKind::no_threshold: return "no_threshold";
    case ErrorKind::resonance: return "resonance";
    case ErrorKind::branch_absent: return "branch_absent";
    case ErrorKind::near_symmetry_degenerate: return "near_symmetry_degenerate";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::stiffness: return "stiffness";
    case ErrorKind::resource: return "resource";
    case ErrorKind::consistency: return "consistency";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::argument, what);
}

}  // namespace twistlab

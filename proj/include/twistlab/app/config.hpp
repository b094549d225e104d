#pragma once

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "twistlab/errors.hpp"

namespace twistlab::app {

inline constexpr const char* tool_version = "0.1.0";

enum class ExitCode { ok = 0, usage = 2, domain = 3, io = 4 };

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct KeySpec {
  std::string name;
  std::string fallback;
  std::string help;
};

struct CommandSpec {
  std::string name;
  std::string summary;
  std::vector<KeySpec> keys;
};

// Keys shared by every command.
inline const std::vector<KeySpec>& common_keys() {
  static const std::vector<KeySpec> keys = {
      {"out", "twistlab-out", "output directory"},
      {"formats", "csv,json", "report formats: csv, json or both"},
      {"seed", "1", "base random seed"},
      {"threads", "", "worker threads (integer or auto); defaults to TWISTLAB_THREADS, else 1"},
      {"plot", "false", "also write a gnuplot script"},
  };
  return keys;
}

inline const std::vector<CommandSpec>& commands() {
  static const std::vector<KeySpec> params = {
      {"q", "5", "twist number"},
      {"lambda", "0", "triplet strength"},
      {"mu", "0", "quadruplet strength"},
  };
  auto with = [](std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  static const std::vector<KeySpec> curve = {
      {"family", "r-linear", "parameter curve: r-linear, lambda-linear, mixed-linear, t-family"},
      {"at", "attractive-threshold",
       "base point: attractive-threshold, repulsive-threshold, finite-attractive-threshold, "
       "finite-repulsive-threshold or point (uses r)"},
      {"r", "0.1", "coupling range when at=point"},
      {"direction", "1,0,0", "curve derivative (dr,dlambda,dmu) for mixed-linear"},
      {"t", "0", "t-family parameter"},
      {"ell", "auto", "critical mode or auto"},
      {"kernel", "continuum", "coefficients from the continuum or the finite ring (finite)"},
      {"M", "1000", "ring size for finite kernels and refinements"},
      {"s0", "0", "curve parameter at which a_app is evaluated"},
  };
  static const std::vector<KeySpec> ring = {
      {"M", "1000", "ring size"},
      {"at", "point", "base point: point (uses r), finite-attractive-threshold, finite-repulsive-threshold"},
      {"r", "0.1", "coupling range when at=point"},
      {"s", "0", "offset added to the base coupling range"},
      {"sign", "attractive", "attractive or repulsive"},
      {"orders", "pairwise", "interaction orders: comma list of pairwise, triplet, quadruplet"},
      {"weights", "fractional", "boundary weights: fractional or integer"},
  };
  static const std::vector<CommandSpec> cmds = {
      {"kernel", "Fourier coefficients and coefficient algebra for one parameter point",
       with(with({}, params), {{"r", "0.1", "coupling range"}, {"kmax", "20", "largest mode listed"}})},
      {"spectrum", "eigenvalues c1(q,k,p) of the q-twisted state",
       with(with({}, params), {{"r", "0.1", "coupling range, or lo:hi:n for a sweep"},
                               {"tol", "1e-6", "certified accuracy of the supremum"},
                               {"kmax", "auto", "number of modes written (auto = all certified modes)"},
                               {"sign", "attractive", "attractive or repulsive"}})},
      {"thresholds", "bifurcation radii r0^a, r0^r and r*",
       {{"q", "5", "twist number, or lo:hi for a range"},
        {"kind", "all", "attractive, repulsive, r-star or all"},
        {"M", "0", "also compute finite-ring thresholds for this ring size (0 = off)"}}},
      {"gamma", "pitchfork coefficients gamma1, gamma2 along a parameter curve",
       with({{"q", "5", "twist number, or lo:hi for a range"},
             {"lambda", "0", "triplet strength"},
             {"mu", "0", "quadruplet strength"}},
            curve)},
      {"branch", "branch profiles Z1, Z2 and optional Newton refinement",
       with(with(with({}, params), curve),
            {{"a", "auto", "branch amplitude (auto = a_app at s0)"},
             {"order", "2", "profile order written as the primary values (1 or 2)"},
             {"grid", "1000", "profile grid size"},
             {"refine", "false", "refine with Newton on the finite ring of size M"},
             {"error_scaling", "", "comma list of s values for the error-order study"}})},
      {"simulate", "time integration of the finite ring from perturbed twisted states",
       with(with(with({}, params), ring),
            {{"amplitude", "1e-2", "uniform perturbation amplitude"},
             {"seeds", "1", "comma list of perturbation seeds, or lo:hi"},
             {"t_end", "1e6", "final time"},
             {"tol", "1e-9", "integrator tolerance"},
             {"stepper", "dopri54", "dopri54 or rk4"},
             {"h", "0.1", "fixed step for rk4"},
             {"equilibrium_tol", "1e-10", "early stop when the right-hand side drops below this"},
             {"polish", "true", "refine the final state with Newton"},
             {"sample_every", "0", "trajectory sampling interval (0 = off)"}})},
      {"equilibrium", "Newton refinement of a ring equilibrium",
       with(with(with({}, params), ring),
            {{"init", "twisted", "initial guess: twisted, z1 or z2"},
             {"ell", "auto", "critical mode for z1/z2 initial guesses"},
             {"max_iter", "50", "Newton iteration cap"},
             {"tol", "1e-12", "residual tolerance"},
             {"n_eigs", "6", "leading Jacobian eigenvalues reported"}})},
      {"stability-map", "maximal eigenvalue over an (r, lambda) grid with boundary classification",
       {{"q", "8", "twist number"},
        {"r", "0.05:0.5:128", "r axis lo:hi:n"},
        {"lambda", "-2:2:128", "lambda axis lo:hi:n"},
        {"tol", "1e-6", "spectrum accuracy"}}},
      {"iota", "the scaling function iota on a grid",
       {{"from", "0.3", "first upsilon"}, {"to", "5", "last upsilon"}, {"steps", "100", "number of intervals"}}},
  };
  return cmds;
}

inline const CommandSpec* find_command(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return &c;
  return nullptr;
}

struct Preset {
  std::string name;
  std::string command;
  std::map<std::string, std::string> values;
  std::string description;
};

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> p = {
      {"fig2", "spectrum", {{"q", "5"}, {"r", "0.001:0.5:500"}, {"kmax", "12"}},
       "eigenvalues of the 5-twisted state against r"},
      {"fig3a", "gamma", {{"q", "1:60"}, {"family", "r-linear"}, {"at", "attractive-threshold"}, {"ell", "1"}},
       "gamma ratio of the attractive model against q"},
      {"fig3b", "gamma", {{"q", "2:60"}, {"family", "r-linear"}, {"at", "repulsive-threshold"}},
       "gamma ratio of the repulsive model against q"},
      {"fig4", "stability-map", {{"q", "8"}, {"r", "0.02:0.5:128"}, {"lambda", "-10:10:128"}},
       "maximal eigenvalue of the 8-twisted state over (r, lambda)"},
      {"fig5", "branch",
       {{"q", "5"}, {"ell", "1"}, {"at", "finite-attractive-threshold"}, {"M", "1000"}, {"s0", "-1e-4"},
        {"order", "2"}, {"grid", "1000"}, {"refine", "true"}},
       "bifurcating equilibrium of the attractive ring with its first and second order approximations"},
      {"fig6", "simulate",
       {{"q", "5"}, {"M", "1000"}, {"at", "finite-repulsive-threshold"}, {"s", "-1e-5"}, {"sign", "repulsive"},
        {"amplitude", "1e-2"}, {"seeds", "1:4"}, {"t_end", "1e6"}, {"polish", "true"}},
       "repulsive ring simulations from perturbed 5-twisted states"},
      {"fig7", "iota", {{"from", "0.05"}, {"to", "5"}, {"steps", "495"}}, "the scaling function iota"},
  };
  return p;
}

inline const Preset* find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return &p;
  return nullptr;
}

struct RunConfig {
  std::string command;
  std::string preset;
  std::map<std::string, std::string> parameters;  // command keys, fully resolved
  std::string output_dir = "twistlab-out";
  std::vector<std::string> formats{"csv", "json"};
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string threads_spec = "1";
  bool plot = false;

  bool wants(const std::string& fmt) const {
    return std::find(formats.begin(), formats.end(), fmt) != formats.end();
  }

  const std::string& get(const std::string& key) const {
    auto it = parameters.find(key);
    if (it == parameters.end()) throw UsageError("missing parameter '" + key + "'");
    return it->second;
  }
};

// Typed parsing helpers; all failures are usage errors.

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw UsageError("parameter '" + key + "' expects a number, got '" + v + "'");
  }
  return out;
}

inline long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  auto s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw UsageError("parameter '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw UsageError("parameter '" + key + "' expects true or false, got '" + v + "'");
}

inline std::string to_choice(const std::string& key, const std::string& v, const std::vector<std::string>& allowed) {
  if (std::find(allowed.begin(), allowed.end(), v) != allowed.end()) return v;
  std::string list;
  for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
  throw UsageError("parameter '" + key + "' must be one of " + list + ", got '" + v + "'");
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  long n = 1;
};

// "lo:hi:n" or a single number (n = 1).
inline Range to_range(const std::string& key, const std::string& v) {
  auto parts = split(v, ':');
  if (parts.size() == 1) {
    double x = to_double(key, parts[0]);
    return {x, x, 1};
  }
  if (parts.size() != 3) throw UsageError("parameter '" + key + "' expects lo:hi:n, got '" + v + "'");
  Range r{to_double(key, parts[0]), to_double(key, parts[1]), to_long(key, parts[2])};
  if (r.n < 2 || !(r.lo < r.hi)) throw UsageError("parameter '" + key + "' needs lo < hi and n >= 2");
  return r;
}

// "a", "a:b" (inclusive) or "a,b,c".
inline std::vector<long> to_int_list(const std::string& key, const std::string& v) {
  std::vector<long> out;
  auto colon = split(v, ':');
  if (colon.size() == 2) {
    long a = to_long(key, colon[0]), b = to_long(key, colon[1]);
    if (b < a) throw UsageError("parameter '" + key + "' range is empty");
    if (b - a > 100000) throw UsageError("parameter '" + key + "' range is too long");
    for (long i = a; i <= b; ++i) out.push_back(i);
    return out;
  }
  if (colon.size() != 1) throw UsageError("parameter '" + key + "' expects a, a:b or a list");
  for (const auto& s : split(v, ',')) out.push_back(to_long(key, s));
  if (out.empty()) throw UsageError("parameter '" + key + "' is empty");
  return out;
}

inline std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (trim(v).empty()) return out;
  for (const auto& s : split(v, ',')) out.push_back(to_double(key, s));
  return out;
}

inline unsigned resolve_threads(const std::string& spec) {
  std::string s = trim(spec);
  if (s.empty()) {
    const char* env = std::getenv("TWISTLAB_THREADS");
    s = env ? trim(env) : "1";
    if (s.empty()) s = "1";
  }
  if (s == "auto") return std::max(1u, std::thread::hardware_concurrency());
  long n = to_long("threads", s);
  if (n < 1 || n > 1024) throw UsageError("threads must lie in [1, 1024] or be 'auto'");
  return static_cast<unsigned>(n);
}

}  // namespace twistlab::app

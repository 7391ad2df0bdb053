#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pdmp/expr.hpp"

namespace pdmp {

// Column-stochastic switching kernel: p(to, from) is the probability of
// landing in state `to` given a switch fires in state `from`.  Each column
// sums to 1; diagonal entries are allowed (a self-switch is a real event).
struct JumpMatrix {
  int states = 0;
  std::vector<double> p;  // row-major, p[to * states + from]

  double operator()(int to, int from) const { return p[static_cast<std::size_t>(to) * states + from]; }
  double& at(int to, int from) { return p[static_cast<std::size_t>(to) * states + from]; }

  static JumpMatrix uniform(int s);
};

// Complete model: one drift law and switching rate per state plus the
// switching kernel.  `domain` is an optional user-pinned spatial interval;
// when absent it is derived from the drift attractors.
struct ModelSpec {
  std::vector<DriftExpr> drifts;
  std::vector<double> rates;  // mu_s >= 0
  JumpMatrix jump;
  std::optional<std::array<double, 2>> domain;

  int states() const { return static_cast<int>(drifts.size()); }
};

struct Violation {
  std::string field;    // "states", "rates", "q"
  std::string index;    // e.g. "[2]", "(0,1)", "column 3"
  double observed = 0.0;
  std::string message;

  std::string format() const;
};

// Structural checks: at least one state, matching lengths, entries of q in
// [0,1] with unit column sums (tolerance 1e-12), finite non-negative rates.
std::vector<Violation> validate_model(const ModelSpec& spec);

// Master-equation generator paired with the column convention of JumpMatrix:
// Q(l,s) = (p(l,s) - delta_ls) * mu_s, so each column sums to zero and
// -Q(s,s) = mu_s*(1 - p(s,s)) is the effective exit rate of state s.
struct GeneratorMatrix {
  int states = 0;
  std::vector<double> q;  // row-major, q[l * states + s]

  double operator()(int l, int s) const { return q[static_cast<std::size_t>(l) * states + s]; }
};

// Requires a spec that passes validate_model; throws ConfigError otherwise.
GeneratorMatrix generator_matrix(const ModelSpec& spec);

struct DomainInfo {
  double lo = 0.0;
  double hi = 0.0;
  bool widened = false;  // degenerate attractor hull widened by 1 on each side
};

// User domain verbatim when present; otherwise the attractor hull of the
// drifts, which requires every drift to fold to a*x + b with a < 0.  Throws
// ConfigError when no domain can be derived.
DomainInfo equilibrium_domain(const ModelSpec& spec);

}  // namespace pdmp

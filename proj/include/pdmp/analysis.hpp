#pragma once

#include <span>
#include <string>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/solver.hpp"

namespace pdmp {

struct CheckReport {
  std::string name;
  bool pass = false;
  double observed = 0.0;
  double tolerance = 0.0;
  std::string location;

  // "CHECK <name> <PASS|FAIL> observed=<v> tol=<t> at=<loc>"
  std::string format() const;
};

// Smallest forward difference of every per-state CDF, including the left
// boundary against the ghost value 0.  Passes when it is >= -tol.
CheckReport check_monotone(const FieldState& f, double tol);

// Total mass at both edges: sum_s F_s(x_max) vs 1 and sum_s F_s(x_min) vs
// the initial left-edge mass (0 for data supported inside the domain).
CheckReport check_conservation(const FieldState& f, const MarginalState& pi, double tol,
                               double initial_left_mass = 0.0);

// Column-sum norm of I + dt*Q, which equals 1 exactly when
// dt * max_s(-Q_ss) <= 1; pass tolerance is 1e-12.
CheckReport stochastic_norm_check(const GeneratorMatrix& gen, double dt);

// Kolmogorov-Smirnov distance between the grid CDF (treated as the
// right-continuous step function through its node values, 0 before the grid)
// and the empirical CDF of a sorted sample.  The supremum is scanned over all
// grid nodes and sample points, comparing matching sides of each jump.
double ks_distance(const Grid& grid, std::span<const double> cdf,
                   std::span<const double> sorted_samples);

struct ConvergenceResult {
  std::vector<double> dxs;     // coarse to fine
  std::vector<double> errors;  // max-node deviation from the finest grid
  double order = 0.0;          // least-squares slope of log error vs log dx
};

// Self-convergence on nested dyadic grids: level j uses (base_count-1)*2^j
// intervals, runs to T with dt = dt_factor * (its own stability bound), and
// is compared with the finest level on shared nodes.  Needs levels >= 3 and
// smooth initial data for a meaningful slope.
ConvergenceResult convergence_order(const ModelSpec& spec, const InitialCondition& ic, double T,
                                    int levels, int base_count, double dt_factor = 0.9);

}  // namespace pdmp

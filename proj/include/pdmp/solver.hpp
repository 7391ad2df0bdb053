#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdmp/model.hpp"

namespace pdmp {

// Uniform 1-D grid with `count` nodes (at least 3) spanning [x_min, x_max].
struct Grid {
  double x_min = 0.0;
  double x_max = 0.0;
  int count = 0;
  double dx = 0.0;

  // The last node is pinned to x_max exactly so boundary data lands on it.
  double node(int k) const { return k == count - 1 ? x_max : x_min + k * dx; }
};

Grid build_grid(double x_min, double x_max, int count);

// Picks the node count nearest the requested spacing; the realized dx may
// differ slightly because the span is divided evenly.
Grid build_grid_dx(double x_min, double x_max, double target_dx);

// Per-state cumulative distribution values on the grid: row s holds
// F_s(x_k, t), the probability of {X <= x_k, S = s}.
struct FieldState {
  int states = 0;
  int nodes = 0;
  double t = 0.0;
  std::vector<double> values;  // states*nodes, row-major

  double at(int s, int k) const { return values[static_cast<std::size_t>(s) * nodes + k]; }
  double& at(int s, int k) { return values[static_cast<std::size_t>(s) * nodes + k]; }
  std::span<const double> row(int s) const {
    return {values.data() + static_cast<std::size_t>(s) * nodes, static_cast<std::size_t>(nodes)};
  }
};

// State-occupation probabilities pi_s(t); sums to 1.
struct MarginalState {
  double t = 0.0;
  std::vector<double> pi;
};

// Initial data per state: weighted unit steps and/or a tabulated CDF part.
// The table is 0 below its first abscissa, linearly interpolated inside, and
// flat at its last value above; a nonzero first value acts as an atom there.
struct StepAtom {
  double w = 0.0;   // mass, >= 0
  double x0 = 0.0;  // location, inside the grid span
};

struct StateInitial {
  std::vector<StepAtom> steps;
  std::vector<double> table_x;  // strictly increasing when present
  std::vector<double> table_f;  // non-decreasing, same length as table_x

  bool has_table() const { return !table_x.empty(); }
  double total_mass() const;
  double eval(double x) const;  // right-continuous CDF value
};

using InitialCondition = std::vector<StateInitial>;

struct InitState {
  FieldState field;
  MarginalState marginal;
};

// Samples the initial CDFs onto the grid and reads off pi_s(0) from the
// right boundary.  Throws ConfigError on malformed data (mass not summing to
// 1 within 1e-10, steps outside the span, non-monotone tables).
InitState init_cauchy(const ModelSpec& spec, const Grid& grid, const InitialCondition& ic);

// Drift values A_s(x_k) for all states and nodes, row-major; throws
// EvalError when any value is non-finite.
std::vector<double> drift_table(const ModelSpec& spec, const Grid& grid);

// Largest stable explicit step: 1 / (M/dx + max_s mu_s*(1 - q_ss)) with M the
// grid maximum of |A_s(x_k)|.  +infinity when both terms vanish.
double cfl_max_dt(const ModelSpec& spec, const Grid& grid);

// One explicit upwind step of the field and the matching forward-Euler step
// of the marginal.  The field step uses ghost values F = 0 left of the grid
// and F = pi_s(t) right of it, with pi taken at the field's CURRENT time, so
// callers must advance the field before committing the new marginal.
FieldState upwind_step(const FieldState& f, const MarginalState& pi, const ModelSpec& spec,
                       const Grid& grid, double dt, bool allow_cfl_violation = false);

MarginalState marginal_step(const MarginalState& pi, const GeneratorMatrix& gen, double dt);

struct Snapshot {
  FieldState field;
  MarginalState marginal;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;  // one per requested time, final time last
  long steps_taken = 0;
  double dt_max = 0.0;
};

// Raised when a step produces a non-finite value; carries the failing step,
// state and node plus whatever snapshots were already collected.
class NumericError : public std::runtime_error {
 public:
  NumericError(long step, double t, int state, int node, std::vector<Snapshot> partial)
      : std::runtime_error("non-finite field value at step " + std::to_string(step) +
                           " (t = " + std::to_string(t) + "), state " + std::to_string(state) +
                           ", node " + std::to_string(node)),
        step_(step),
        t_(t),
        state_(state),
        node_(node),
        partial_(std::move(partial)) {}
  long step() const { return step_; }
  double t() const { return t_; }
  int state() const { return state_; }
  int node() const { return node_; }
  const std::vector<Snapshot>& partial_snapshots() const { return partial_; }

 private:
  long step_;
  double t_;
  int state_;
  int node_;
  std::vector<Snapshot> partial_;
};

struct SolveOptions {
  std::vector<double> snapshot_times;  // non-decreasing, within [0, T]
  bool allow_cfl_violation = false;
};

// Marches the coupled field/marginal system from t = 0 to t = T with step dt,
// shortening individual steps so every snapshot time (and T itself) is hit
// exactly.  Refuses dt > cfl_max_dt unless overridden (CflError).  The final
// state is always included as the last snapshot.
Trajectory solve(const ModelSpec& spec, const Grid& grid, const InitialCondition& ic, double T,
                 double dt, const SolveOptions& opts = {});

// Sum over states of the per-state CDFs.
std::vector<double> total_cdf(const FieldState& f);

struct DensityField {
  int states = 0;
  int nodes = 0;
  std::vector<double> per_state;  // backward differences / dx, ghost 0 at the left edge
  std::vector<double> total;
};

DensityField density(const FieldState& f, double dx);

// Leading-order numerical diffusion of the scheme at one node:
// |A| dx/2 * (1 - |A| dt/dx).
double diffusion_coefficient(const ModelSpec& spec, const Grid& grid, double dt, int state,
                             int node);

// CSV snapshot: header x,F_1..F_S,p_1..p_S,F_total,p_total; 17 significant
// digits per value.
void write_snapshot_csv(std::ostream& os, const Grid& grid, const FieldState& f);

}  // namespace pdmp

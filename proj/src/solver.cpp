#include "pdmp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

constexpr double kMassTol = 1e-10;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Advances every state row by one explicit upwind step.  `f` and `out` hold
// S*K values row-major; `a` is the drift table; `gen` the S*S generator; `pi`
// the marginal AT THE SAME TIME as `f` (it supplies the right ghost value).
void upwind_kernel(int s_count, int k_count, const double* f, double* out, const double* a,
                   const double* gen, const double* pi, double dt, double dx) {
  for (int l = 0; l < s_count; ++l) {
    const double* fl = f + static_cast<std::size_t>(l) * k_count;
    const double* al = a + static_cast<std::size_t>(l) * k_count;
    const double* gl = gen + static_cast<std::size_t>(l) * s_count;
    double* ol = out + static_cast<std::size_t>(l) * k_count;
    for (int k = 0; k < k_count; ++k) {
      const double adv = al[k];
      // One-sided difference against the wind; ghosts: 0 on the left,
      // pi_l on the right (the CDF saturates at the marginal).
      double diff;
      if (adv < 0.0)
        diff = (k + 1 < k_count ? fl[k + 1] : pi[l]) - fl[k];
      else
        diff = fl[k] - (k > 0 ? fl[k - 1] : 0.0);
      double coupling = 0.0;
      for (int s = 0; s < s_count; ++s) coupling += gl[s] * f[static_cast<std::size_t>(s) * k_count + k];
      ol[k] = fl[k] + dt * (-adv * diff / dx + coupling);
    }
  }
}

// Returns the flat index of the first non-finite entry, or -1.
long first_non_finite(const std::vector<double>& v) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) return static_cast<long>(i);
  return -1;
}

}  // namespace

Grid build_grid(double x_min, double x_max, int count) {
  if (!(x_min < x_max))
    throw ConfigError("grid domain [" + fmt(x_min) + ", " + fmt(x_max) + "] is empty or inverted");
  if (count < 3) throw ConfigError("grid needs at least 3 nodes, got " + std::to_string(count));
  Grid g;
  g.x_min = x_min;
  g.x_max = x_max;
  g.count = count;
  g.dx = (x_max - x_min) / (count - 1);
  return g;
}

Grid build_grid_dx(double x_min, double x_max, double target_dx) {
  if (!(x_min < x_max))
    throw ConfigError("grid domain [" + fmt(x_min) + ", " + fmt(x_max) + "] is empty or inverted");
  if (!(target_dx > 0.0) || !std::isfinite(target_dx))
    throw ConfigError("grid spacing must be positive, got " + fmt(target_dx));
  const double intervals = std::round((x_max - x_min) / target_dx);
  if (intervals < 2.0)
    throw ConfigError("grid spacing " + fmt(target_dx) + " is too coarse for the domain");
  if (intervals > 5e7) throw ConfigError("grid spacing " + fmt(target_dx) + " is too fine");
  return build_grid(x_min, x_max, static_cast<int>(intervals) + 1);
}

double StateInitial::total_mass() const {
  double m = 0.0;
  for (const auto& s : steps) m += s.w;
  if (has_table()) m += table_f.back();
  return m;
}

double StateInitial::eval(double x) const {
  double v = 0.0;
  for (const auto& s : steps)
    if (x >= s.x0) v += s.w;
  if (has_table()) {
    if (x >= table_x.back()) {
      v += table_f.back();
    } else if (x >= table_x.front()) {
      const auto it = std::upper_bound(table_x.begin(), table_x.end(), x);
      const std::size_t j = static_cast<std::size_t>(it - table_x.begin()) - 1;
      const double span = table_x[j + 1] - table_x[j];
      const double frac = span > 0.0 ? (x - table_x[j]) / span : 0.0;
      v += table_f[j] + frac * (table_f[j + 1] - table_f[j]);
    }
  }
  return v;
}

InitState init_cauchy(const ModelSpec& spec, const Grid& grid, const InitialCondition& ic) {
  const int s_count = spec.states();
  if (static_cast<int>(ic.size()) != s_count)
    throw ConfigError("initial data has " + std::to_string(ic.size()) + " states, model has " +
                      std::to_string(s_count));
  for (int s = 0; s < s_count; ++s) {
    const auto& st = ic[s];
    for (const auto& step : st.steps) {
      if (!std::isfinite(step.w) || step.w < 0.0)
        throw ConfigError("initial step weight of state " + std::to_string(s) +
                          " must be non-negative, got " + fmt(step.w));
      if (!std::isfinite(step.x0) || step.x0 < grid.x_min || step.x0 > grid.x_max)
        throw ConfigError("initial step at x = " + fmt(step.x0) + " of state " +
                          std::to_string(s) + " lies outside the grid span [" + fmt(grid.x_min) +
                          ", " + fmt(grid.x_max) + "]");
    }
    if (st.table_x.size() != st.table_f.size())
      throw ConfigError("initial CDF table of state " + std::to_string(s) +
                        " has mismatched x/F lengths");
    if (st.has_table()) {
      if (st.table_x.size() < 2)
        throw ConfigError("initial CDF table of state " + std::to_string(s) +
                          " needs at least 2 points");
      for (std::size_t i = 0; i < st.table_x.size(); ++i) {
        if (!std::isfinite(st.table_x[i]) || !std::isfinite(st.table_f[i]))
          throw ConfigError("initial CDF table of state " + std::to_string(s) +
                            " contains non-finite entries");
        if (i > 0 && !(st.table_x[i] > st.table_x[i - 1]))
          throw ConfigError("initial CDF table abscissae of state " + std::to_string(s) +
                            " must be strictly increasing");
        if (i > 0 && st.table_f[i] < st.table_f[i - 1])
          throw ConfigError("initial CDF table of state " + std::to_string(s) +
                            " must be non-decreasing");
      }
      if (st.table_f.front() < 0.0)
        throw ConfigError("initial CDF table of state " + std::to_string(s) +
                          " starts below zero");
    }
  }

  InitState out;
  out.field.states = s_count;
  out.field.nodes = grid.count;
  out.field.t = 0.0;
  out.field.values.resize(static_cast<std::size_t>(s_count) * grid.count);
  out.marginal.t = 0.0;
  out.marginal.pi.resize(s_count);
  double total = 0.0;
  for (int s = 0; s < s_count; ++s) {
    for (int k = 0; k < grid.count; ++k) out.field.at(s, k) = ic[s].eval(grid.node(k));
    out.marginal.pi[s] = out.field.at(s, grid.count - 1);
    total += out.marginal.pi[s];
  }
  if (std::fabs(total - 1.0) > kMassTol)
    throw ConfigError("initial mass on the grid is " + fmt(total) +
                      ", expected 1 (check weights and that tables saturate inside the domain)");
  return out;
}

std::vector<double> drift_table(const ModelSpec& spec, const Grid& grid) {
  const int s_count = spec.states();
  std::vector<double> a(static_cast<std::size_t>(s_count) * grid.count);
  for (int s = 0; s < s_count; ++s)
    for (int k = 0; k < grid.count; ++k)
      a[static_cast<std::size_t>(s) * grid.count + k] = spec.drifts[s].eval_checked(grid.node(k));
  return a;
}

double cfl_max_dt(const ModelSpec& spec, const Grid& grid) {
  const auto a = drift_table(spec, grid);
  double m = 0.0;
  for (double v : a) m = std::max(m, std::fabs(v));
  double rate = 0.0;
  for (int s = 0; s < spec.states(); ++s)
    rate = std::max(rate, spec.rates[s] * (1.0 - spec.jump(s, s)));
  const double denom = m / grid.dx + rate;
  if (denom <= 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / denom;
}

FieldState upwind_step(const FieldState& f, const MarginalState& pi, const ModelSpec& spec,
                       const Grid& grid, double dt, bool allow_cfl_violation) {
  const double dt_max = cfl_max_dt(spec, grid);
  if (dt > dt_max && !allow_cfl_violation) throw CflError(dt, dt_max);
  const auto a = drift_table(spec, grid);
  const auto gen = generator_matrix(spec);
  FieldState out;
  out.states = f.states;
  out.nodes = f.nodes;
  out.t = f.t + dt;
  out.values.resize(f.values.size());
  upwind_kernel(f.states, f.nodes, f.values.data(), out.values.data(), a.data(), gen.q.data(),
                pi.pi.data(), dt, grid.dx);
  return out;
}

MarginalState marginal_step(const MarginalState& pi, const GeneratorMatrix& gen, double dt) {
  const int s_count = gen.states;
  MarginalState out;
  out.t = pi.t + dt;
  out.pi.resize(s_count);
  for (int l = 0; l < s_count; ++l) {
    double rhs = 0.0;
    for (int s = 0; s < s_count; ++s) rhs += gen(l, s) * pi.pi[s];
    out.pi[l] = pi.pi[l] + dt * rhs;
  }
  return out;
}

Trajectory solve(const ModelSpec& spec, const Grid& grid, const InitialCondition& ic, double T,
                 double dt, const SolveOptions& opts) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw ConfigError("horizon T must be >= 0, got " + fmt(T));
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be > 0, got " + fmt(dt));
  for (std::size_t i = 0; i < opts.snapshot_times.size(); ++i) {
    const double t = opts.snapshot_times[i];
    if (!(t >= 0.0) || t > T)
      throw ConfigError("snapshot time " + fmt(t) + " lies outside [0, " + fmt(T) + "]");
    if (i > 0 && t < opts.snapshot_times[i - 1])
      throw ConfigError("snapshot times must be non-decreasing");
  }

  const double dt_max = cfl_max_dt(spec, grid);
  if (dt > dt_max && !opts.allow_cfl_violation) throw CflError(dt, dt_max);

  const auto a = drift_table(spec, grid);
  const auto gen = generator_matrix(spec);
  InitState init = init_cauchy(spec, grid, ic);

  Trajectory traj;
  traj.dt_max = dt_max;

  // Split [0, T] at the snapshot times; inside each segment march with the
  // nominal dt and shorten the last step to land on the segment end exactly.
  std::vector<double> targets;
  for (double t : opts.snapshot_times) {
    if (t == 0.0) {
      if (traj.snapshots.empty()) traj.snapshots.push_back({init.field, init.marginal});
      continue;
    }
    if (targets.empty() || t > targets.back()) targets.push_back(t);
  }
  if (targets.empty() || targets.back() < T) targets.push_back(T);

  const int s_count = spec.states();
  const int k_count = grid.count;
  std::vector<double> cur = std::move(init.field.values);
  std::vector<double> nxt(cur.size());
  MarginalState pi = std::move(init.marginal);

  double t_now = 0.0;
  for (double target : targets) {
    const double seg = target - t_now;
    const long n = seg > 0.0 ? static_cast<long>(std::ceil(seg / dt - 1e-12)) : 0;
    for (long i = 0; i < n; ++i) {
      const double t_step = t_now + static_cast<double>(i) * dt;
      const double h = (i == n - 1) ? target - t_step : dt;
      upwind_kernel(s_count, k_count, cur.data(), nxt.data(), a.data(), gen.q.data(),
                    pi.pi.data(), h, grid.dx);
      pi = marginal_step(pi, gen, h);
      cur.swap(nxt);
      ++traj.steps_taken;
      const long bad = first_non_finite(cur);
      if (bad >= 0) {
        const int s = static_cast<int>(bad / k_count);
        const int k = static_cast<int>(bad % k_count);
        throw NumericError(traj.steps_taken, t_step + h, s, k, std::move(traj.snapshots));
      }
    }
    t_now = target;
    Snapshot snap;
    snap.field.states = s_count;
    snap.field.nodes = k_count;
    snap.field.t = t_now;
    snap.field.values = cur;
    snap.marginal = pi;
    snap.marginal.t = t_now;
    traj.snapshots.push_back(std::move(snap));
  }
  return traj;
}

std::vector<double> total_cdf(const FieldState& f) {
  std::vector<double> out(f.nodes, 0.0);
  for (int s = 0; s < f.states; ++s)
    for (int k = 0; k < f.nodes; ++k) out[k] += f.at(s, k);
  return out;
}

DensityField density(const FieldState& f, double dx) {
  DensityField d;
  d.states = f.states;
  d.nodes = f.nodes;
  d.per_state.resize(f.values.size());
  d.total.assign(f.nodes, 0.0);
  for (int s = 0; s < f.states; ++s)
    for (int k = 0; k < f.nodes; ++k) {
      const double left = k > 0 ? f.at(s, k - 1) : 0.0;
      const double v = (f.at(s, k) - left) / dx;
      d.per_state[static_cast<std::size_t>(s) * f.nodes + k] = v;
      d.total[k] += v;
    }
  return d;
}

double diffusion_coefficient(const ModelSpec& spec, const Grid& grid, double dt, int state,
                             int node) {
  const double a = std::fabs(spec.drifts[state].eval_checked(grid.node(node)));
  return 0.5 * a * grid.dx * (1.0 - a * dt / grid.dx);
}

void write_snapshot_csv(std::ostream& os, const Grid& grid, const FieldState& f) {
  os << "x";
  for (int s = 0; s < f.states; ++s) os << ",F_" << (s + 1);
  for (int s = 0; s < f.states; ++s) os << ",p_" << (s + 1);
  os << ",F_total,p_total\n";
  const DensityField dens = density(f, grid.dx);
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (int k = 0; k < grid.count; ++k) {
    put(grid.node(k));
    double ftot = 0.0;
    for (int s = 0; s < f.states; ++s) {
      os << ',';
      put(f.at(s, k));
      ftot += f.at(s, k);
    }
    for (int s = 0; s < f.states; ++s) {
      os << ',';
      put(dens.per_state[static_cast<std::size_t>(s) * f.nodes + k]);
    }
    os << ',';
    put(ftot);
    os << ',';
    put(dens.total[k]);
    os << '\n';
  }
}

}  // namespace pdmp

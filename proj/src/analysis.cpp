#include "pdmp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Right-continuous step extension of node values: the value at x is the CDF
// at the last node <= x (strictly < x for the left limit), 0 before the grid.
double stairs_at(const Grid& grid, std::span<const double> cdf, double x, bool left_limit) {
  if (x < grid.x_min || (left_limit && x == grid.x_min)) return 0.0;
  if (x >= grid.x_max) {
    if (!left_limit || x > grid.x_max) return cdf.back();
  }
  int k = static_cast<int>(std::floor((x - grid.x_min) / grid.dx));
  if (k > grid.count - 1) k = grid.count - 1;
  while (k > 0 && grid.node(k) > x) --k;
  while (k + 1 < grid.count && grid.node(k + 1) <= x) ++k;
  if (left_limit && grid.node(k) == x) --k;
  return k < 0 ? 0.0 : cdf[k];
}

}  // namespace

std::string CheckReport::format() const {
  return "CHECK " + name + (pass ? " PASS" : " FAIL") + " observed=" + fmt(observed) +
         " tol=" + fmt(tolerance) + " at=" + location;
}

CheckReport check_monotone(const FieldState& f, double tol) {
  CheckReport r;
  r.name = "monotone";
  r.tolerance = tol;
  double worst = std::numeric_limits<double>::infinity();
  int worst_s = 0, worst_k = 0;
  for (int s = 0; s < f.states; ++s)
    for (int k = 0; k < f.nodes; ++k) {
      const double d = f.at(s, k) - (k > 0 ? f.at(s, k - 1) : 0.0);
      if (std::isnan(d)) {
        r.pass = false;
        r.observed = d;
        r.location = "state " + std::to_string(s) + " node " + std::to_string(k);
        return r;
      }
      if (d < worst) {
        worst = d;
        worst_s = s;
        worst_k = k;
      }
    }
  r.observed = worst;
  r.pass = worst >= -tol;
  r.location = "state " + std::to_string(worst_s) + " node " + std::to_string(worst_k);
  return r;
}

CheckReport check_conservation(const FieldState& f, const MarginalState& pi, double tol,
                               double initial_left_mass) {
  CheckReport r;
  r.name = "conservation";
  r.tolerance = tol;
  double right = 0.0, left = 0.0;
  for (int s = 0; s < f.states; ++s) {
    right += f.at(s, f.nodes - 1);
    left += f.at(s, 0);
  }
  (void)pi;
  const double right_dev = std::fabs(right - 1.0);
  const double left_dev = std::fabs(left - initial_left_mass);
  if (right_dev >= left_dev) {
    r.observed = right_dev;
    r.location = "x_max";
  } else {
    r.observed = left_dev;
    r.location = "x_min";
  }
  r.pass = right_dev <= tol && left_dev <= tol && !std::isnan(right) && !std::isnan(left);
  return r;
}

CheckReport stochastic_norm_check(const GeneratorMatrix& gen, double dt) {
  CheckReport r;
  r.name = "stochastic_norm";
  r.tolerance = 1e-12;
  double norm = 0.0;
  int worst_col = 0;
  for (int j = 0; j < gen.states; ++j) {
    double col = 0.0;
    for (int i = 0; i < gen.states; ++i) {
      const double delta = (i == j) ? 1.0 : 0.0;
      col += std::fabs(delta + dt * gen(i, j));
    }
    if (col > norm) {
      norm = col;
      worst_col = j;
    }
  }
  r.observed = norm;
  r.pass = std::fabs(norm - 1.0) <= r.tolerance;
  r.location = "column " + std::to_string(worst_col);
  double max_exit = 0.0;
  for (int j = 0; j < gen.states; ++j) max_exit = std::max(max_exit, -gen(j, j));
  if (dt * max_exit > 1.0) r.location += " (dt above positivity bound)";
  return r;
}

double ks_distance(const Grid& grid, std::span<const double> cdf,
                   std::span<const double> sorted_samples) {
  if (sorted_samples.empty()) throw std::invalid_argument("empty sample");
  if (static_cast<int>(cdf.size()) != grid.count)
    throw std::invalid_argument("CDF length does not match the grid");
  const double n = static_cast<double>(sorted_samples.size());
  double d = 0.0;
  // Both functions are right-continuous steps, so the pointwise supremum is
  // attained at a node or a sample point; each side of a jump is compared
  // with the matching side of the other function (sides are never crossed).
  std::size_t below = 0;  // count of samples < x
  std::size_t at = 0;     // count of samples <= x
  for (int k = 0; k < grid.count; ++k) {
    const double x = grid.node(k);
    while (below < sorted_samples.size() && sorted_samples[below] < x) ++below;
    at = below;
    while (at < sorted_samples.size() && sorted_samples[at] <= x) ++at;
    const double left = k > 0 ? cdf[k - 1] : 0.0;
    d = std::max(d, std::fabs(left - static_cast<double>(below) / n));
    d = std::max(d, std::fabs(cdf[k] - static_cast<double>(at) / n));
  }
  for (std::size_t i = 0; i < sorted_samples.size();) {
    const double x = sorted_samples[i];
    std::size_t hi = i;
    while (hi + 1 < sorted_samples.size() && sorted_samples[hi + 1] == x) ++hi;
    d = std::max(d, std::fabs(stairs_at(grid, cdf, x, true) - static_cast<double>(i) / n));
    d = std::max(d,
                 std::fabs(stairs_at(grid, cdf, x, false) - static_cast<double>(hi + 1) / n));
    i = hi + 1;
  }
  return d;
}

ConvergenceResult convergence_order(const ModelSpec& spec, const InitialCondition& ic, double T,
                                    int levels, int base_count, double dt_factor) {
  if (levels < 3) throw std::invalid_argument("need at least 3 refinement levels");
  if (base_count < 3) throw std::invalid_argument("base grid needs at least 3 nodes");
  if (!(dt_factor > 0.0 && dt_factor <= 1.0))
    throw std::invalid_argument("dt factor must lie in (0, 1]");
  const DomainInfo dom = equilibrium_domain(spec);
  const long base_intervals = base_count - 1;

  std::vector<std::vector<double>> totals;
  ConvergenceResult res;
  for (int j = 0; j <= levels; ++j) {
    const long intervals = base_intervals << j;
    const Grid grid = build_grid(dom.lo, dom.hi, static_cast<int>(intervals) + 1);
    const double dt = dt_factor * cfl_max_dt(spec, grid);
    Trajectory traj = solve(spec, grid, ic, T, dt);
    totals.push_back(total_cdf(traj.snapshots.back().field));
    if (j < levels) res.dxs.push_back(grid.dx);
  }
  const auto& ref = totals.back();
  for (int j = 0; j < levels; ++j) {
    const long stride = 1L << (levels - j);
    double err = 0.0;
    for (std::size_t k = 0; k < totals[j].size(); ++k)
      err = std::max(err, std::fabs(totals[j][k] - ref[k * stride]));
    res.errors.push_back(err);
  }
  // Least-squares slope of log(error) against log(dx).
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const int n = levels;
  for (int j = 0; j < n; ++j) {
    const double lx = std::log(res.dxs[j]);
    const double ly = std::log(std::max(res.errors[j], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  res.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return res;
}

}  // namespace pdmp

// Acceptance gate for the solver + sampler pipeline.  Each criterion prints
// exactly one [PASS]/[FAIL] line; the binary exits nonzero if any fail.
// Tolerances are pinned here on purpose — do not loosen them to make a run
// green.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pdmp/analysis.hpp"
#include "pdmp/config.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/expr.hpp"
#include "pdmp/mc.hpp"
#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/solver.hpp"

namespace {

const std::filesystem::path kConfigDir = PDMP_CONFIG_DIR;

int g_failed = 0;

// Marks the enclosing criterion failed but keeps evaluating so the log shows
// every violated condition, not just the first.
#define EXPECT(ok, cond, ...)                      \
  do {                                             \
    if (!(cond)) {                                 \
      std::printf("  violated: %s  (", #cond);     \
      std::printf(__VA_ARGS__);                    \
      std::printf(")\n");                          \
      ok = false;                                  \
    }                                              \
  } while (0)

void report(int idx, const char* label, bool ok) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", idx, label);
  if (!ok) ++g_failed;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// --- criterion 1: stability bound of the bundled relaxation model ----------

bool criterion_stability_bound() {
  bool ok = true;
  const pdmp::RunConfig cfg = pdmp::load_config(kConfigDir / "relaxation4_cfl.json");
  std::printf("  dt_max = %.17g\n", cfg.dt_max);
  EXPECT(ok, std::fabs(cfg.dt_max - 0.250063) <= 1e-5, "observed %.17g", cfg.dt_max);
  return ok;
}

// --- criterion 2: long stable run keeps every structural invariant ---------

bool criterion_stable_run() {
  bool ok = true;
  const pdmp::RunConfig cfg = pdmp::load_config(kConfigDir / "relaxation4_stable.json");
  const auto traj = pdmp::solve(cfg.model, cfg.grid, cfg.initial, cfg.T, cfg.dt);
  std::printf("  steps = %ld\n", traj.steps_taken);
  EXPECT(ok, traj.steps_taken == 2424, "got %ld", traj.steps_taken);

  const auto& fin = traj.snapshots.back();
  const auto mono = pdmp::check_monotone(fin.field, 1e-12);
  const auto cons = pdmp::check_conservation(fin.field, fin.marginal, 1e-9, 0.0);
  std::printf("  %s\n  %s\n", mono.format().c_str(), cons.format().c_str());
  EXPECT(ok, mono.pass, "worst diff %.3g", mono.observed);
  EXPECT(ok, cons.pass, "deviation %.3g", cons.observed);

  const auto dens = pdmp::density(fin.field, cfg.grid.dx);
  double min_density = 0.0;
  double integral = 0.0;
  for (int k = 0; k < fin.field.nodes; ++k) {
    min_density = std::min(min_density, dens.total[k]);
    integral += dens.total[k] * cfg.grid.dx;
  }
  std::printf("  min density = %.3g, integral = %.12g\n", min_density, integral);
  EXPECT(ok, min_density >= -1e-9, "min density %.3g", min_density);
  EXPECT(ok, std::fabs(integral - 1.0) <= 1e-6, "integral %.12g", integral);
  return ok;
}

// --- criterion 3: over-long steps blow up and the checks catch it ----------

bool criterion_unstable_run_detected() {
  bool ok = true;
  const pdmp::RunConfig cfg = pdmp::load_config(kConfigDir / "relaxation4_unstable.json");
  pdmp::SolveOptions opts;
  opts.allow_cfl_violation = cfg.allow_cfl_violation;
  EXPECT(ok, cfg.dt > cfg.dt_max, "dt %.6g vs bound %.6g", cfg.dt, cfg.dt_max);

  const auto traj = pdmp::solve(cfg.model, cfg.grid, cfg.initial, cfg.T, cfg.dt, opts);
  const auto mono = pdmp::check_monotone(traj.snapshots.back().field, 1e-12);
  std::printf("  steps = %ld\n  %s\n", traj.steps_taken, mono.format().c_str());
  EXPECT(ok, !mono.pass, "instability was not flagged");
  return ok;
}

// --- criterion 4: one-step operator preserves total probability ------------

bool criterion_stochastic_norm() {
  bool ok = true;
  const pdmp::RunConfig cfg = pdmp::load_config(kConfigDir / "relaxation4_cfl.json");
  const auto gen = pdmp::generator_matrix(cfg.model);

  const auto good = pdmp::stochastic_norm_check(gen, 0.2);
  const auto bad = pdmp::stochastic_norm_check(gen, 0.4);
  std::printf("  %s\n  %s\n", good.format().c_str(), bad.format().c_str());
  EXPECT(ok, good.pass, "norm %.17g at dt=0.2", good.observed);
  EXPECT(ok, !bad.pass, "norm %.17g at dt=0.4 should exceed 1", bad.observed);
  EXPECT(ok, std::fabs(bad.observed - 1.4) <= 1e-12, "norm %.17g", bad.observed);

  // Randomized sweep: any generator with dt at or below the positivity bound
  // must keep the one-step matrix column-stochastic to rounding.
  pdmp::Xoshiro256pp rng(314159, 0);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int s_count = 1 + static_cast<int>(rng.uniform01() * 6.0);
    pdmp::ModelSpec spec;
    spec.jump.states = s_count;
    spec.jump.p.assign(static_cast<std::size_t>(s_count) * s_count, 0.0);
    for (int s = 0; s < s_count; ++s) {
      spec.drifts.push_back(pdmp::parse_drift("0"));
      spec.rates.push_back(rng.uniform01() * 3.0);
      double col_sum = 0.0;
      std::vector<double> col(s_count);
      for (int l = 0; l < s_count; ++l) col_sum += col[l] = 0.01 + rng.uniform01();
      for (int l = 0; l < s_count; ++l) spec.jump.at(l, s) = col[l] / col_sum;
    }
    const auto g = pdmp::generator_matrix(spec);
    double worst_exit = 0.0;
    for (int s = 0; s < s_count; ++s)
      worst_exit = std::max(worst_exit, spec.rates[s] * (1.0 - spec.jump(s, s)));
    const double dt =
        worst_exit > 0.0 ? rng.uniform01() * 0.999 / worst_exit : 1.0 + rng.uniform01() * 100.0;
    const auto rep = pdmp::stochastic_norm_check(g, dt);
    if (!rep.pass) {
      std::printf("  trial %d: %s\n", trial, rep.format().c_str());
      ok = false;
      break;
    }
    ++checked;
  }
  std::printf("  random generators checked: %d\n", checked);
  EXPECT(ok, checked == 1000, "stopped after %d", checked);
  return ok;
}

// --- criterion 5: fuzzed compliant models never lose monotonicity ----------

bool criterion_random_model_fuzz() {
  bool ok = true;
  const auto t0 = Clock::now();
  pdmp::Xoshiro256pp rng(777, 0);

  for (int trial = 0; trial < 200 && ok; ++trial) {
    const int s_count = 1 + static_cast<int>(rng.uniform01() * 5.0);
    pdmp::ModelSpec spec;
    spec.jump.states = s_count;
    spec.jump.p.assign(static_cast<std::size_t>(s_count) * s_count, 0.0);
    for (int s = 0; s < s_count; ++s) {
      const double a = -(0.1 + rng.uniform01() * 1.9);
      const double b = -1.0 + 2.0 * rng.uniform01();
      char buf[96];
      std::snprintf(buf, sizeof(buf), "%.17g*x%+.17g", a, b);
      spec.drifts.push_back(pdmp::parse_drift(buf));
      spec.rates.push_back(rng.uniform01() * 2.0);
      double col_sum = 0.0;
      std::vector<double> col(s_count);
      for (int l = 0; l < s_count; ++l) col_sum += col[l] = 0.05 + rng.uniform01();
      for (int l = 0; l < s_count; ++l) spec.jump.at(l, s) = col[l] / col_sum;
    }
    auto dom = pdmp::equilibrium_domain(spec);
    dom.lo -= 0.5 + rng.uniform01();
    dom.hi += 0.5 + rng.uniform01();
    spec.domain = {dom.lo, dom.hi};
    const pdmp::Grid grid = pdmp::build_grid(dom.lo, dom.hi, 51 + static_cast<int>(rng.uniform01() * 100.0));

    pdmp::InitialCondition ic(s_count);
    std::vector<double> w(s_count);
    double w_sum = 0.0;
    for (int s = 0; s < s_count; ++s) w_sum += w[s] = 0.05 + rng.uniform01();
    for (int s = 0; s < s_count; ++s) {
      const double x0 = dom.lo + (dom.hi - dom.lo) * (0.2 + 0.6 * rng.uniform01());
      ic[s].steps.push_back({w[s] / w_sum, x0});
    }

    const double dt_max = pdmp::cfl_max_dt(spec, grid);
    const double dt = (0.5 + 0.49 * rng.uniform01()) * dt_max;
    const long steps = 500;

    const auto traj = pdmp::solve(spec, grid, ic, steps * dt, dt);
    const auto mono = pdmp::check_monotone(traj.snapshots.back().field, 1e-12);
    if (!mono.pass) {
      std::printf("  trial %d: %s\n", trial, mono.format().c_str());
      ok = false;
    }
    for (double v : traj.snapshots.back().field.values)
      if (v < -1e-9 || v > 1.0 + 1e-9) {
        std::printf("  trial %d: value %.17g escapes [0, 1]\n", trial, v);
        ok = false;
        break;
      }
  }
  const double elapsed = seconds_since(t0);
  std::printf("  200 models, %.1f s\n", elapsed);
  EXPECT(ok, elapsed < 60.0, "%.1f s", elapsed);
  return ok;
}

// --- criterion 6: first-order self-convergence on a smooth switching flow --

bool criterion_convergence() {
  bool ok = true;
  pdmp::ModelSpec spec;
  spec.drifts.push_back(pdmp::parse_drift("1"));
  spec.drifts.push_back(pdmp::parse_drift("-1"));
  spec.rates = {1.0, 1.0};
  spec.jump.states = 2;
  spec.jump.p = {0.0, 1.0, 1.0, 0.0};
  spec.domain = {{-6.0, 6.0}};

  pdmp::InitialCondition ic(2);
  for (auto& st : ic) {
    for (int i = 0; i < 33; ++i) {
      const double u = i / 32.0;
      st.table_x.push_back(-1.0 + 2.0 * u);
      st.table_f.push_back(0.5 * u * u * u * (10.0 - 15.0 * u + 6.0 * u * u));
    }
  }

  const auto res1 = pdmp::convergence_order(spec, ic, 1.0, 4, 25);
  std::printf("  T=1: order %.3f, errors", res1.order);
  for (double e : res1.errors) std::printf(" %.3e", e);
  std::printf("\n");
  EXPECT(ok, res1.order >= 0.7 && res1.order <= 1.3, "order %.3f", res1.order);
  for (std::size_t i = 1; i < res1.errors.size(); ++i)
    EXPECT(ok, res1.errors[i] < res1.errors[i - 1], "errors not decreasing at level %zu", i);

  // Error accumulation over time: doubling the horizon may at most modestly
  // grow the self-difference at a fixed resolution.
  const auto res2 = pdmp::convergence_order(spec, ic, 2.0, 4, 25);
  const auto res4 = pdmp::convergence_order(spec, ic, 4.0, 4, 25);
  const double r21 = res2.errors.back() / res1.errors.back();
  const double r42 = res4.errors.back() / res2.errors.back();
  std::printf("  growth per horizon doubling: %.3f, %.3f\n", r21, r42);
  EXPECT(ok, r21 <= 2.5, "ratio %.3f", r21);
  EXPECT(ok, r42 <= 2.5, "ratio %.3f", r42);
  return ok;
}

// --- criterion 7: field solution agrees with direct path sampling ----------

bool criterion_cross_validation() {
  bool ok = true;
  const pdmp::RunConfig cfg = pdmp::load_config(kConfigDir / "switching_mc.json");
  pdmp::SolveOptions opts;
  opts.snapshot_times = cfg.snapshots;
  const auto traj = pdmp::solve(cfg.model, cfg.grid, cfg.initial, cfg.T, cfg.dt, opts);

  for (const auto& snap : traj.snapshots) {
    // The agreement budget applies to the positive horizons only: at t=0 the
    // initial point masses sit between grid nodes, and a grid CDF cannot
    // localize an atom below one cell.
    if (snap.field.t == 0.0) continue;
    const auto cdf = pdmp::total_cdf(snap.field);
    pdmp::PathConfig pc;
    pc.paths = cfg.mc->n;
    pc.horizon = snap.field.t;
    pc.seed = cfg.mc->seed;
    pc.substep = cfg.mc->substep;
    const auto ens = pdmp::run_ensemble(cfg.model, cfg.initial, pc, 4);
    const double ks = pdmp::ks_distance(cfg.grid, cdf, ens.endpoints);
    std::printf("  KS t=%-4g ks=%.6f n=%zu\n", snap.field.t, ks, ens.endpoints.size());
    EXPECT(ok, ks <= 0.02, "ks %.6f at t=%g", ks, snap.field.t);
  }
  return ok;
}

// --- criterion 8: unit-Courant pure transport is bitwise exact -------------

bool criterion_exact_transport() {
  bool ok = true;
  pdmp::ModelSpec spec;
  spec.drifts.push_back(pdmp::parse_drift("1"));
  spec.rates = {0.0};
  spec.jump = pdmp::JumpMatrix::uniform(1);
  spec.domain = {{0.0, 1.0}};
  const pdmp::Grid grid = pdmp::build_grid(0.0, 1.0, 17);

  pdmp::InitialCondition ic(1);
  ic[0].steps.push_back({0.25, 0.125});
  ic[0].steps.push_back({0.375, 0.25});
  ic[0].steps.push_back({0.375, 0.5});

  auto init = pdmp::init_cauchy(spec, grid, ic);
  const std::vector<double> start = init.field.values;
  const double dt = grid.dx;  // unit Courant number: dt equals the bound
  pdmp::FieldState f = init.field;
  pdmp::MarginalState pi = init.marginal;
  for (int step = 0; step < 8; ++step) {
    f = pdmp::upwind_step(f, pi, spec, grid, dt);
    pi = pdmp::marginal_step(pi, pdmp::generator_matrix(spec), dt);
  }

  double worst = 0.0;
  for (int k = 0; k < grid.count; ++k) {
    const double expect = k >= 8 ? start[static_cast<std::size_t>(k - 8)] : 0.0;
    worst = std::max(worst, std::fabs(f.values[static_cast<std::size_t>(k)] - expect));
  }
  std::printf("  max deviation after 8 unit-Courant steps: %.17g\n", worst);
  EXPECT(ok, worst == 0.0, "deviation %.17g", worst);
  return ok;
}

// --- criterion 9: sampling is deterministic and thread-count invariant -----

bool criterion_ensemble_determinism() {
  bool ok = true;
  const auto t0 = Clock::now();
  const pdmp::RunConfig cfg = pdmp::load_config(kConfigDir / "telegraph_smooth.json");

  pdmp::PathConfig pc;
  pc.paths = cfg.mc->n;
  pc.horizon = cfg.T;
  pc.seed = cfg.mc->seed;
  pc.substep = cfg.mc->substep;

  std::string csv[3];
  const int thread_counts[3] = {1, 4, 3};
  for (int i = 0; i < 3; ++i) {
    const auto ens = pdmp::run_ensemble(cfg.model, cfg.initial, pc, thread_counts[i]);
    std::ostringstream out;
    pdmp::write_ensemble_csv(out, ens);
    csv[i] = out.str();
  }
  EXPECT(ok, csv[0] == csv[1], "1-thread vs 4-thread output differs");
  EXPECT(ok, csv[0] == csv[2], "1-thread vs 3-thread output differs");

  pc.seed = cfg.mc->seed + 1;
  const auto other = pdmp::run_ensemble(cfg.model, cfg.initial, pc, 4);
  std::ostringstream out;
  pdmp::write_ensemble_csv(out, other);
  EXPECT(ok, out.str() != csv[0], "different seed reproduced the same ensemble");

  const double elapsed = seconds_since(t0);
  std::printf("  4 ensembles of %zu paths, %.1f s\n", pc.paths, elapsed);
  EXPECT(ok, elapsed < 30.0, "%.1f s", elapsed);
  return ok;
}

// --- criterion 10: drift grammar goldens and round-trip stability ----------

pdmp::ExprRef random_tree(pdmp::Xoshiro256pp& rng, int depth) {
  using pdmp::ExprKind;
  auto node = std::make_shared<pdmp::ExprNode>();
  const double pick = rng.uniform01();
  if (depth <= 0 || pick < 0.3) {
    if (rng.uniform01() < 0.4) {
      node->kind = ExprKind::Variable;
    } else {
      node->kind = ExprKind::Number;
      node->number = rng.uniform01() < 0.3 ? std::floor(rng.uniform01() * 10.0)
                                           : rng.uniform01() * 10.0;
    }
    return node;
  }
  if (pick < 0.45) {
    node->kind = ExprKind::Negate;
    node->lhs = random_tree(rng, depth - 1);
    return node;
  }
  if (pick < 0.6) {
    node->kind = ExprKind::Call;
    node->func = static_cast<pdmp::FuncId>(static_cast<int>(rng.uniform01() * 5.0) % 5);
    node->lhs = random_tree(rng, depth - 1);
    return node;
  }
  node->kind = ExprKind::Binary;
  const char ops[] = {'+', '-', '*', '/', '^'};
  node->op = ops[static_cast<int>(rng.uniform01() * 5.0) % 5];
  node->lhs = random_tree(rng, depth - 1);
  node->rhs = random_tree(rng, depth - 1);
  return node;
}

bool criterion_parser() {
  bool ok = true;
  EXPECT(ok, pdmp::parse_drift("2^3^2").eval(0.0) == 512.0, "right-assoc power");
  EXPECT(ok, pdmp::parse_drift("-2^2").eval(0.0) == 4.0, "unary minus binds below power");
  EXPECT(ok, pdmp::parse_drift("2+3*4").eval(0.0) == 14.0, "precedence");
  EXPECT(ok, pdmp::parse_drift("exp(0)+cos(0)").eval(0.0) == 2.0, "calls");
  EXPECT(ok, pdmp::parse_drift("abs(-3.5)").eval(0.0) == 3.5, "abs of negation");
  EXPECT(ok, pdmp::parse_drift("-0.001*x+1").eval(1000.0) == 0.0, "fixed point");

  const auto aff = pdmp::parse_drift("2*x+1").as_affine();
  EXPECT(ok, aff && aff->a == 2.0 && aff->b == 1.0, "affine detection");

  bool threw = false;
  try {
    (void)pdmp::parse_drift("2**x");
  } catch (const pdmp::ParseError&) {
    threw = true;
  }
  EXPECT(ok, threw, "'2**x' must be a syntax error");
  threw = false;
  try {
    (void)pdmp::parse_drift("foo(x)");
  } catch (const pdmp::ParseError&) {
    threw = true;
  }
  EXPECT(ok, threw, "unknown functions must be rejected");

  pdmp::Xoshiro256pp rng(4242, 0);
  int survived = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const pdmp::DriftExpr original(random_tree(rng, 5));
    const std::string text = original.to_string();
    const pdmp::DriftExpr reparsed = pdmp::parse_drift(text);
    if (!original.same_structure(reparsed) || reparsed.to_string() != text) {
      std::printf("  round-trip broke for: %s\n", text.c_str());
      ok = false;
      break;
    }
    ++survived;
  }
  std::printf("  random expressions round-tripped: %d\n", survived);
  EXPECT(ok, survived == 100, "stopped after %d", survived);
  return ok;
}

bool run_guarded(bool (*fn)(), const char* label) {
  try {
    return fn();
  } catch (const std::exception& e) {
    std::printf("  unexpected exception in %s: %s\n", label, e.what());
    return false;
  }
}

}  // namespace

int main() {
  struct Criterion {
    const char* label;
    bool (*fn)();
  };
  const Criterion criteria[] = {
      {"stability bound matches the hand-computed value", criterion_stability_bound},
      {"long stable run keeps monotonicity, conservation and positivity", criterion_stable_run},
      {"oversized steps are caught by the runtime checks", criterion_unstable_run_detected},
      {"one-step operator is column-stochastic up to rounding", criterion_stochastic_norm},
      {"200 fuzzed compliant models stay monotone within budget", criterion_random_model_fuzz},
      {"smooth switching flow self-converges at first order", criterion_convergence},
      {"field solution matches path sampling in KS distance", criterion_cross_validation},
      {"unit-Courant transport is bitwise exact", criterion_exact_transport},
      {"ensembles are seed-deterministic and thread-invariant", criterion_ensemble_determinism},
      {"drift grammar goldens and round-trips hold", criterion_parser},
  };

  int idx = 0;
  for (const auto& c : criteria) {
    ++idx;
    report(idx, c.label, run_guarded(c.fn, c.label));
  }

  if (g_failed == 0) {
    std::printf("all 10 criteria passed\n");
    return 0;
  }
  std::printf("%d of 10 criteria failed\n", g_failed);
  return 1;
}

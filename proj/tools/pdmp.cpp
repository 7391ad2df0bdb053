// Command-line front end: stability reporting, grid solves, path ensembles,
// solver-vs-sampler comparison, and grid-refinement studies.
//
// Exit codes: 0 success, 2 bad config, 3 step refused by the stability
// bound, 4 a reported check failed, 5 numeric blow-up at run time.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pdmp/analysis.hpp"
#include "pdmp/config.hpp"
#include "pdmp/errors.hpp"
#include "pdmp/mc.hpp"
#include "pdmp/model.hpp"
#include "pdmp/solver.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCfl = 3;
constexpr int kExitCheckFailed = 4;
constexpr int kExitNumeric = 5;

std::string format_time_tag(double t) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", t);
  return buf;
}

std::filesystem::path snapshot_path(const pdmp::RunConfig& cfg, double t) {
  return std::filesystem::path(cfg.output_dir) / (cfg.name + "_t" + format_time_tag(t) + ".csv");
}

void write_snapshot_file(const pdmp::RunConfig& cfg, const pdmp::Snapshot& snap) {
  const auto path = snapshot_path(cfg, snap.field.t);
  std::ofstream out(path);
  if (!out) throw pdmp::ConfigError("cannot write " + path.string());
  pdmp::write_snapshot_csv(out, cfg.grid, snap.field);
  std::cout << "wrote " << path.string() << "\n";
}

double initial_left_mass(const pdmp::RunConfig& cfg) {
  double mass = 0.0;
  for (const auto& st : cfg.initial) mass += st.eval(cfg.grid.x_min);
  return mass;
}

// Prints the CHECK lines for a final state; returns false when any fails.
bool run_state_checks(const pdmp::RunConfig& cfg, const pdmp::Snapshot& snap) {
  const auto mono = pdmp::check_monotone(snap.field, 1e-12);
  const auto cons =
      pdmp::check_conservation(snap.field, snap.marginal, 1e-9, initial_left_mass(cfg));
  const auto norm =
      pdmp::stochastic_norm_check(pdmp::generator_matrix(cfg.model), cfg.dt);
  std::cout << mono.format() << "\n" << cons.format() << "\n" << norm.format() << "\n";
  return mono.pass && cons.pass && norm.pass;
}

int cmd_cfl(const pdmp::RunConfig& cfg) {
  const auto table = pdmp::drift_table(cfg.model, cfg.grid);
  double m = 0.0;
  for (double v : table) m = std::max(m, std::fabs(v));
  double rate = 0.0;
  for (int s = 0; s < cfg.model.states(); ++s)
    rate = std::max(rate, cfg.model.rates[s] * (1.0 - cfg.model.jump(s, s)));
  std::printf("domain = [%.17g, %.17g]%s\n", cfg.grid.x_min, cfg.grid.x_max,
              cfg.domain_was_derived ? " (derived)" : "");
  std::printf("k = %d\n", cfg.grid.count);
  std::printf("dx = %.17g\n", cfg.grid.dx);
  std::printf("max |drift| = %.17g\n", m);
  std::printf("max exit rate = %.17g\n", rate);
  if (std::isfinite(cfg.dt_max))
    std::printf("dt_max = %.6f (%.17g)\n", cfg.dt_max, cfg.dt_max);
  else
    std::printf("dt_max = unbounded\n");
  std::printf("dt = %.17g%s\n", cfg.dt, cfg.dt_was_auto ? " (auto)" : "");
  return kExitOk;
}

int cmd_solve(const pdmp::RunConfig& cfg) {
  pdmp::SolveOptions opts;
  opts.snapshot_times = cfg.snapshots;
  opts.allow_cfl_violation = cfg.allow_cfl_violation;
  std::filesystem::create_directories(cfg.output_dir);
  const pdmp::Trajectory traj =
      pdmp::solve(cfg.model, cfg.grid, cfg.initial, cfg.T, cfg.dt, opts);
  for (const auto& snap : traj.snapshots) write_snapshot_file(cfg, snap);
  std::printf("steps = %ld, dt = %.17g, dt_max = %.17g\n", traj.steps_taken, cfg.dt,
              traj.dt_max);
  return run_state_checks(cfg, traj.snapshots.back()) ? kExitOk : kExitCheckFailed;
}

int cmd_simulate(const pdmp::RunConfig& cfg, int threads) {
  if (!cfg.mc) throw pdmp::ConfigError("config error at /mc: required for this command");
  pdmp::PathConfig pc{cfg.mc->n, cfg.T, cfg.mc->seed, cfg.mc->substep};
  const pdmp::SampleEnsemble ens = pdmp::run_ensemble(cfg.model, cfg.initial, pc, threads);
  std::filesystem::create_directories(cfg.output_dir);
  const auto path = std::filesystem::path(cfg.output_dir) / (cfg.name + "_ensemble.csv");
  std::ofstream out(path);
  if (!out) throw pdmp::ConfigError("cannot write " + path.string());
  pdmp::write_ensemble_csv(out, ens);
  std::cout << "wrote " << path.string() << " (" << ens.endpoints.size() << " paths)\n";
  return kExitOk;
}

int cmd_compare(const pdmp::RunConfig& cfg, int threads) {
  if (!cfg.mc) throw pdmp::ConfigError("config error at /mc: required for this command");
  pdmp::SolveOptions opts;
  opts.snapshot_times = cfg.snapshots;
  opts.allow_cfl_violation = cfg.allow_cfl_violation;
  const pdmp::Trajectory traj =
      pdmp::solve(cfg.model, cfg.grid, cfg.initial, cfg.T, cfg.dt, opts);
  for (const auto& snap : traj.snapshots) {
    pdmp::PathConfig pc{cfg.mc->n, snap.field.t, cfg.mc->seed, cfg.mc->substep};
    const pdmp::SampleEnsemble ens = pdmp::run_ensemble(cfg.model, cfg.initial, pc, threads);
    const double ks =
        pdmp::ks_distance(cfg.grid, pdmp::total_cdf(snap.field), ens.endpoints);
    std::printf("KS t=%g ks=%.6f n=%zu\n", snap.field.t, ks, ens.endpoints.size());
  }
  return run_state_checks(cfg, traj.snapshots.back()) ? kExitOk : kExitCheckFailed;
}

int cmd_convergence(const pdmp::RunConfig& cfg, int levels) {
  const pdmp::ConvergenceResult res =
      pdmp::convergence_order(cfg.model, cfg.initial, cfg.T, levels, cfg.grid.count);
  for (std::size_t j = 0; j < res.dxs.size(); ++j)
    std::printf("level %zu dx=%.17g err=%.17g\n", j, res.dxs[j], res.errors[j]);
  std::printf("order = %.3f\n", res.order);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution-function solver and path sampler for flows with random switching"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  int threads = 0;
  int levels = 4;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run description")->required();
    cmd->add_option("--out", out_override, "override the configured output directory");
  };
  CLI::App* c_cfl = app.add_subcommand("cfl", "report grid, drift bound and largest stable step");
  CLI::App* c_solve = app.add_subcommand("solve", "march the distribution functions and write snapshots");
  CLI::App* c_sim = app.add_subcommand("simulate", "sample path endpoints and write the ensemble");
  CLI::App* c_cmp = app.add_subcommand("compare", "solve, sample, and report the KS distance per snapshot");
  CLI::App* c_conv = app.add_subcommand("convergence", "self-convergence order under grid refinement");
  for (CLI::App* cmd : {c_cfl, c_solve, c_sim, c_cmp, c_conv}) add_common(cmd);
  c_sim->add_option("--threads", threads, "worker threads (0 = all cores)");
  c_cmp->add_option("--threads", threads, "worker threads (0 = all cores)");
  c_conv->add_option("--levels", levels, "refinement levels")->check(CLI::Range(3, 12));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    pdmp::RunConfig cfg = pdmp::load_config(config_path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (c_cfl->parsed()) return cmd_cfl(cfg);
    if (c_solve->parsed()) return cmd_solve(cfg);
    if (c_sim->parsed()) return cmd_simulate(cfg, threads);
    if (c_cmp->parsed()) return cmd_compare(cfg, threads);
    if (c_conv->parsed()) return cmd_convergence(cfg, levels);
    return kExitOk;
  } catch (const pdmp::CflError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCfl;
  } catch (const pdmp::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const pdmp::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const pdmp::EvalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pdmp/model.hpp"
#include "pdmp/rng.hpp"
#include "pdmp/solver.hpp"

namespace pdmp {

struct PathConfig {
  std::size_t paths = 0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  double substep = 1e-2;  // RK4 step for drifts without a closed-form flow
};

struct EnsembleProvenance {
  std::uint64_t seed = 0;
  std::size_t paths = 0;
  double horizon = 0.0;
  std::string generator;
};

// Endpoint sample (X_T, S_T) of every path, sorted by (endpoint, state) so
// that the result is independent of the thread partition.
struct SampleEnsemble {
  std::vector<double> endpoints;
  std::vector<int> end_states;
  EnsembleProvenance provenance;
};

// tau = -ln(u)/rate for u in (0,1]; +infinity when rate is 0.
double waiting_time_from_uniform(double u, double rate);
double sample_waiting_time(Xoshiro256pp& rng, double rate);

// Walks the landing distribution (column `from`) and returns the first state
// whose cumulative probability exceeds u.
int next_state_from_uniform(double u, const JumpMatrix& jump, int from);
int sample_next_state(Xoshiro256pp& rng, const JumpMatrix& jump, int from);

// Flows x0 for time tau along the drift: exact exponential formula when the
// expression folds to a*x + b, classical RK4 with step `substep` otherwise.
double integrate_drift(const DriftExpr& drift, double x0, double tau, double substep);

// Always integrates numerically; exposed so the RK4 path can be checked
// against the closed form on affine drifts.
double integrate_drift_rk4(const DriftExpr& drift, double x0, double tau, double substep);

struct PathEndpoint {
  double x = 0.0;
  int state = 0;
};

// One path from (x0, s0) to time T.  Waiting times are exponential with the
// current state's rate; a switch scheduled exactly at t = T is not applied.
// Draw order per event: waiting-time uniform, then (only if the switch
// fires before T) the landing uniform.
PathEndpoint simulate_path(const ModelSpec& spec, double x0, int s0, double T, Xoshiro256pp& rng,
                           double substep);

// Draws (x0, s0) from the same initial data the grid solver consumes:
// state by its share of total mass, then x within the state from its atoms
// and tabulated part.  Uses two uniforms per draw, always.
class InitialSampler {
 public:
  InitialSampler(const ModelSpec& spec, const InitialCondition& ic);
  std::pair<double, int> sample(Xoshiro256pp& rng) const;

 private:
  struct StatePart {
    double mass = 0.0;
    std::vector<double> atom_w;
    std::vector<double> atom_x;
    std::vector<double> table_x;
    std::vector<double> table_f;
  };
  std::vector<StatePart> parts_;
  double total_ = 0.0;
};

// Runs cfg.paths independent paths; path m always uses random stream
// (cfg.seed, m), so results are bit-identical for any thread count.
SampleEnsemble run_ensemble(const ModelSpec& spec, const InitialCondition& ic,
                            const PathConfig& cfg, int threads = 1);

// Right-continuous empirical CDF of a sorted sample.
double ecdf_at(std::span<const double> sorted, double x);

// Bin densities normalized to integrate to the sample fraction covered by
// the edges; the last bin is closed on the right.
std::vector<double> histogram_density(std::span<const double> sorted,
                                      std::span<const double> edges);

// CSV: '# seed=<u64> N=<n> T=<t> generator=<name>' comment line, then
// endpoint,end_state rows.
void write_ensemble_csv(std::ostream& os, const SampleEnsemble& ens);

}  // namespace pdmp

#include "pdmp/mc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double flow(const DriftExpr& drift, const std::optional<Affine>& aff, double x0, double tau,
            double substep) {
  if (tau == 0.0) return x0;
  if (aff) {
    if (aff->a == 0.0) return x0 + aff->b * tau;
    const double fixed = -aff->b / aff->a;
    return fixed + (x0 - fixed) * std::exp(aff->a * tau);
  }
  return integrate_drift_rk4(drift, x0, tau, substep);
}

}  // namespace

double waiting_time_from_uniform(double u, double rate) {
  if (!(u > 0.0) || u > 1.0)
    throw std::invalid_argument("waiting-time uniform must lie in (0, 1], got " + fmt(u));
  if (rate <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(u) / rate;
}

double sample_waiting_time(Xoshiro256pp& rng, double rate) {
  return waiting_time_from_uniform(rng.uniform_open_closed(), rate);
}

int next_state_from_uniform(double u, const JumpMatrix& jump, int from) {
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < jump.states; ++i) {
    const double w = jump(i, from);
    if (w > 0.0) last_positive = i;
    acc += w;
    if (u < acc) return i;
  }
  // u landed in the round-off sliver past the accumulated column sum.
  return last_positive >= 0 ? last_positive : jump.states - 1;
}

int sample_next_state(Xoshiro256pp& rng, const JumpMatrix& jump, int from) {
  return next_state_from_uniform(rng.uniform01(), jump, from);
}

double integrate_drift_rk4(const DriftExpr& drift, double x0, double tau, double substep) {
  if (!(tau >= 0.0)) throw std::invalid_argument("flow time must be >= 0, got " + fmt(tau));
  if (!(substep > 0.0)) throw std::invalid_argument("substep must be > 0, got " + fmt(substep));
  if (tau == 0.0) return x0;
  const long n = static_cast<long>(std::ceil(tau / substep - 1e-12));
  double x = x0;
  for (long i = 0; i < n; ++i) {
    const double t_done = static_cast<double>(i) * substep;
    const double h = (i == n - 1) ? tau - t_done : substep;
    const double k1 = drift.eval(x);
    const double k2 = drift.eval(x + 0.5 * h * k1);
    const double k3 = drift.eval(x + 0.5 * h * k2);
    const double k4 = drift.eval(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!std::isfinite(x))
    throw EvalError("drift integration diverged (drift '" + drift.to_string() + "', x0 = " +
                    fmt(x0) + ", tau = " + fmt(tau) + ")");
  return x;
}

double integrate_drift(const DriftExpr& drift, double x0, double tau, double substep) {
  return flow(drift, drift.as_affine(), x0, tau, substep);
}

PathEndpoint simulate_path(const ModelSpec& spec, double x0, int s0, double T, Xoshiro256pp& rng,
                           double substep) {
  const int s_count = spec.states();
  if (s0 < 0 || s0 >= s_count) throw std::invalid_argument("initial state out of range");
  std::vector<std::optional<Affine>> affine(s_count);
  for (int s = 0; s < s_count; ++s) affine[s] = spec.drifts[s].as_affine();

  double t = 0.0;
  double x = x0;
  int s = s0;
  for (;;) {
    const double tau = sample_waiting_time(rng, spec.rates[s]);
    if (t + tau < T) {
      x = flow(spec.drifts[s], affine[s], x, tau, substep);
      t += tau;
      s = sample_next_state(rng, spec.jump, s);
    } else {
      x = flow(spec.drifts[s], affine[s], x, T - t, substep);
      return {x, s};
    }
  }
}

InitialSampler::InitialSampler(const ModelSpec& spec, const InitialCondition& ic) {
  const int s_count = spec.states();
  if (static_cast<int>(ic.size()) != s_count)
    throw ConfigError("initial data has " + std::to_string(ic.size()) + " states, model has " +
                      std::to_string(s_count));
  parts_.resize(s_count);
  for (int s = 0; s < s_count; ++s) {
    const auto& st = ic[s];
    auto& part = parts_[s];
    for (const auto& step : st.steps) {
      if (!std::isfinite(step.w) || step.w < 0.0)
        throw ConfigError("initial step weight of state " + std::to_string(s) +
                          " must be non-negative, got " + fmt(step.w));
      part.atom_w.push_back(step.w);
      part.atom_x.push_back(step.x0);
    }
    if (st.has_table()) {
      if (st.table_x.size() < 2 || st.table_x.size() != st.table_f.size())
        throw ConfigError("initial CDF table of state " + std::to_string(s) + " is malformed");
      part.table_x = st.table_x;
      part.table_f = st.table_f;
    }
    part.mass = st.total_mass();
    total_ += part.mass;
  }
  if (std::fabs(total_ - 1.0) > 1e-10)
    throw ConfigError("initial mass is " + fmt(total_) + ", expected 1");
}

std::pair<double, int> InitialSampler::sample(Xoshiro256pp& rng) const {
  const double u_state = rng.uniform01() * total_;
  const double u_inner = rng.uniform01();
  int s = 0;
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < static_cast<int>(parts_.size()); ++i) {
    if (parts_[i].mass > 0.0) last_positive = i;
    acc += parts_[i].mass;
    if (u_state < acc) {
      s = i;
      break;
    }
    s = last_positive;  // round-off sliver past the last positive-mass state
  }
  const auto& part = parts_[s];
  double target = u_inner * part.mass;
  for (std::size_t i = 0; i < part.atom_w.size(); ++i) {
    if (target < part.atom_w[i]) return {part.atom_x[i], s};
    target -= part.atom_w[i];
  }
  if (part.table_x.empty()) {
    // Round-off pushed the target past every atom; return the last one.
    return {part.atom_x.back(), s};
  }
  // Invert the piecewise-linear tabulated CDF at height `target`.
  const double top = part.table_f.back();
  if (target >= top) return {part.table_x.back(), s};
  const auto it = std::upper_bound(part.table_f.begin(), part.table_f.end(), target);
  std::size_t j = static_cast<std::size_t>(it - part.table_f.begin());
  if (j == 0) return {part.table_x.front(), s};
  const double f_lo = part.table_f[j - 1];
  const double f_hi = part.table_f[j];
  const double frac = f_hi > f_lo ? (target - f_lo) / (f_hi - f_lo) : 0.0;
  return {part.table_x[j - 1] + frac * (part.table_x[j] - part.table_x[j - 1]), s};
}

SampleEnsemble run_ensemble(const ModelSpec& spec, const InitialCondition& ic,
                            const PathConfig& cfg, int threads) {
  if (cfg.paths < 1) throw ConfigError("ensemble needs at least 1 path");
  if (!(cfg.horizon >= 0.0) || !std::isfinite(cfg.horizon))
    throw ConfigError("ensemble horizon must be >= 0, got " + fmt(cfg.horizon));
  if (!(cfg.substep > 0.0)) throw ConfigError("substep must be > 0, got " + fmt(cfg.substep));
  {
    const auto violations = validate_model(spec);
    if (!violations.empty()) {
      std::string msg = "invalid model:";
      for (const auto& v : violations) msg += "\n  " + v.format();
      throw ConfigError(msg);
    }
  }
  const InitialSampler sampler(spec, ic);

  SampleEnsemble ens;
  ens.endpoints.resize(cfg.paths);
  ens.end_states.resize(cfg.paths);
  ens.provenance = {cfg.seed, cfg.paths, cfg.horizon, kRngName};

  unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(
      std::min<std::size_t>(n_threads, cfg.paths));

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&](std::size_t begin, std::size_t end) {
    try {
      for (std::size_t m = begin; m < end; ++m) {
        Xoshiro256pp rng(cfg.seed, m);
        const auto [x0, s0] = sampler.sample(rng);
        const PathEndpoint ep = simulate_path(spec, x0, s0, cfg.horizon, rng, cfg.substep);
        ens.endpoints[m] = ep.x;
        ens.end_states[m] = ep.state;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (n_threads <= 1) {
    worker(0, cfg.paths);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    const std::size_t chunk = (cfg.paths + n_threads - 1) / n_threads;
    for (unsigned i = 0; i < n_threads; ++i) {
      const std::size_t begin = static_cast<std::size_t>(i) * chunk;
      const std::size_t end = std::min(cfg.paths, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  std::vector<std::size_t> order(cfg.paths);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ens.endpoints[a] != ens.endpoints[b]) return ens.endpoints[a] < ens.endpoints[b];
    return ens.end_states[a] < ens.end_states[b];
  });
  SampleEnsemble sorted;
  sorted.provenance = ens.provenance;
  sorted.endpoints.reserve(cfg.paths);
  sorted.end_states.reserve(cfg.paths);
  for (std::size_t idx : order) {
    sorted.endpoints.push_back(ens.endpoints[idx]);
    sorted.end_states.push_back(ens.end_states[idx]);
  }
  return sorted;
}

double ecdf_at(std::span<const double> sorted, double x) {
  if (sorted.empty()) throw std::invalid_argument("empty sample");
  const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

std::vector<double> histogram_density(std::span<const double> sorted,
                                      std::span<const double> edges) {
  if (sorted.empty()) throw std::invalid_argument("empty sample");
  if (edges.size() < 2) throw std::invalid_argument("need at least 2 bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw std::invalid_argument("bin edges must be strictly increasing");
  const std::size_t bins = edges.size() - 1;
  std::vector<double> out(bins, 0.0);
  const double n = static_cast<double>(sorted.size());
  for (std::size_t b = 0; b < bins; ++b) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), edges[b]);
    // Last bin is closed on the right so the top edge is not dropped.
    const auto hi = (b + 1 == bins) ? std::upper_bound(sorted.begin(), sorted.end(), edges[b + 1])
                                    : std::lower_bound(sorted.begin(), sorted.end(), edges[b + 1]);
    out[b] = static_cast<double>(hi - lo) / (n * (edges[b + 1] - edges[b]));
  }
  return out;
}

void write_ensemble_csv(std::ostream& os, const SampleEnsemble& ens) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "# seed=%llu N=%zu T=%.17g generator=%s\n",
                static_cast<unsigned long long>(ens.provenance.seed), ens.provenance.paths,
                ens.provenance.horizon, ens.provenance.generator.c_str());
  os << buf;
  os << "endpoint,end_state\n";
  for (std::size_t i = 0; i < ens.endpoints.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%d\n", ens.endpoints[i], ens.end_states[i]);
    os << buf;
  }
}

}  // namespace pdmp

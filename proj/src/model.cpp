#include "pdmp/model.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {
constexpr double kColumnSumTol = 1e-12;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

JumpMatrix JumpMatrix::uniform(int s) {
  JumpMatrix m;
  m.states = s;
  m.p.assign(static_cast<std::size_t>(s) * s, 1.0 / s);
  return m;
}

std::string Violation::format() const {
  return field + index + ": " + message + " (observed " + fmt(observed) + ")";
}

std::vector<Violation> validate_model(const ModelSpec& spec) {
  std::vector<Violation> out;
  const int s_count = spec.states();
  if (s_count < 1) {
    out.push_back({"states", "", static_cast<double>(s_count), "at least one state required"});
    return out;
  }
  for (int s = 0; s < s_count; ++s) {
    if (spec.drifts[s].empty())
      out.push_back({"states", "[" + std::to_string(s) + "]", 0.0, "missing drift expression"});
  }
  if (static_cast<int>(spec.rates.size()) != s_count) {
    out.push_back({"rates", "", static_cast<double>(spec.rates.size()),
                   "length must match the number of states (" + std::to_string(s_count) + ")"});
  } else {
    for (int s = 0; s < s_count; ++s) {
      const double mu = spec.rates[s];
      if (!std::isfinite(mu) || mu < 0.0)
        out.push_back({"rates", "[" + std::to_string(s) + "]", mu,
                       "switching rate must be finite and non-negative"});
    }
  }
  if (spec.jump.states != s_count ||
      spec.jump.p.size() != static_cast<std::size_t>(s_count) * s_count) {
    out.push_back({"q", "", static_cast<double>(spec.jump.states),
                   "kernel must be " + std::to_string(s_count) + "x" + std::to_string(s_count)});
    return out;
  }
  for (int i = 0; i < s_count; ++i)
    for (int j = 0; j < s_count; ++j) {
      const double v = spec.jump(i, j);
      if (!std::isfinite(v) || v < 0.0 || v > 1.0)
        out.push_back({"q", "(" + std::to_string(i) + "," + std::to_string(j) + ")", v,
                       "entry must lie in [0,1]"});
    }
  for (int j = 0; j < s_count; ++j) {
    double sum = 0.0;
    for (int i = 0; i < s_count; ++i) sum += spec.jump(i, j);
    if (std::fabs(sum - 1.0) > kColumnSumTol)
      out.push_back({"q", " column " + std::to_string(j), sum,
                     "column must sum to 1 (each column is the landing distribution of one "
                     "source state)"});
  }
  return out;
}

GeneratorMatrix generator_matrix(const ModelSpec& spec) {
  auto violations = validate_model(spec);
  if (!violations.empty()) {
    std::string msg = "invalid model:";
    for (const auto& v : violations) msg += "\n  " + v.format();
    throw ConfigError(msg);
  }
  const int s_count = spec.states();
  GeneratorMatrix g;
  g.states = s_count;
  g.q.resize(static_cast<std::size_t>(s_count) * s_count);
  for (int l = 0; l < s_count; ++l)
    for (int s = 0; s < s_count; ++s) {
      const double delta = (l == s) ? 1.0 : 0.0;
      g.q[static_cast<std::size_t>(l) * s_count + s] = (spec.jump(l, s) - delta) * spec.rates[s];
    }
  return g;
}

DomainInfo equilibrium_domain(const ModelSpec& spec) {
  if (spec.domain) {
    const auto& d = *spec.domain;
    if (!(d[0] < d[1]))
      throw ConfigError("domain [" + fmt(d[0]) + ", " + fmt(d[1]) + "] is empty or inverted");
    return {d[0], d[1], false};
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < spec.states(); ++s) {
    const auto aff = spec.drifts[s].as_affine();
    if (!aff || aff->a >= 0.0)
      throw ConfigError("drift of state " + std::to_string(s) +
                        " is not a contraction toward a fixed point; an explicit domain is "
                        "required");
    const double attractor = -aff->b / aff->a;
    lo = std::min(lo, attractor);
    hi = std::max(hi, attractor);
  }
  if (lo == hi) return {lo - 1.0, hi + 1.0, true};
  return {lo, hi, false};
}

}  // namespace pdmp

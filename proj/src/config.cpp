#include "pdmp/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <string>

#include "pdmp/errors.hpp"

namespace pdmp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& ptr, const std::string& what) {
  throw ConfigError("config error at " + (ptr.empty() ? "/" : ptr) + ": " + what);
}

const json& member(const json& obj, const std::string& ptr, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(ptr + "/" + key, "required field is missing");
  return *it;
}

const json* opt_member(const json& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void require_object(const json& v, const std::string& ptr) {
  if (!v.is_object()) fail(ptr, "expected an object");
}

void require_array(const json& v, const std::string& ptr) {
  if (!v.is_array()) fail(ptr, "expected an array");
}

void check_keys(const json& obj, const std::string& ptr,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) fail(ptr + "/" + it.key(), "unknown field");
  }
}

double get_number(const json& v, const std::string& ptr) {
  if (!v.is_number()) fail(ptr, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) fail(ptr, "value must be finite");
  return d;
}

std::string get_string(const json& v, const std::string& ptr) {
  if (!v.is_string()) fail(ptr, "expected a string");
  return v.get<std::string>();
}

long get_integer(const json& v, const std::string& ptr) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail(ptr, "expected an integer");
  return v.get<long>();
}

ModelSpec parse_model(const json& j, const std::string& ptr) {
  require_object(j, ptr);
  check_keys(j, ptr, {"states", "q"});
  const json& states = member(j, ptr, "states");
  require_array(states, ptr + "/states");
  if (states.empty()) fail(ptr + "/states", "at least one state required");

  ModelSpec spec;
  for (std::size_t s = 0; s < states.size(); ++s) {
    const std::string sptr = ptr + "/states/" + std::to_string(s);
    require_object(states[s], sptr);
    check_keys(states[s], sptr, {"drift", "mu"});
    const std::string text = get_string(member(states[s], sptr, "drift"), sptr + "/drift");
    try {
      spec.drifts.push_back(parse_drift(text));
    } catch (const ParseError& e) {
      fail(sptr + "/drift", e.what());
    }
    spec.rates.push_back(get_number(member(states[s], sptr, "mu"), sptr + "/mu"));
  }

  const int s_count = spec.states();
  const json& q = member(j, ptr, "q");
  require_array(q, ptr + "/q");
  if (static_cast<int>(q.size()) != s_count)
    fail(ptr + "/q", "expected " + std::to_string(s_count) + " rows");
  spec.jump.states = s_count;
  spec.jump.p.resize(static_cast<std::size_t>(s_count) * s_count);
  for (int i = 0; i < s_count; ++i) {
    const std::string rptr = ptr + "/q/" + std::to_string(i);
    require_array(q[i], rptr);
    if (static_cast<int>(q[i].size()) != s_count)
      fail(rptr, "expected " + std::to_string(s_count) + " entries");
    for (int c = 0; c < s_count; ++c)
      spec.jump.at(i, c) = get_number(q[i][c], rptr + "/" + std::to_string(c));
  }
  return spec;
}

InitialCondition parse_initial(const json& j, const std::string& ptr, int s_count) {
  require_array(j, ptr);
  if (static_cast<int>(j.size()) != s_count)
    fail(ptr, "expected one entry per state (" + std::to_string(s_count) + ")");
  InitialCondition ic(s_count);
  for (int s = 0; s < s_count; ++s) {
    const std::string sptr = ptr + "/" + std::to_string(s);
    require_object(j[s], sptr);
    check_keys(j[s], sptr, {"steps", "cdf_table"});
    if (const json* steps = opt_member(j[s], "steps")) {
      require_array(*steps, sptr + "/steps");
      for (std::size_t i = 0; i < steps->size(); ++i) {
        const std::string pptr = sptr + "/steps/" + std::to_string(i);
        require_object((*steps)[i], pptr);
        check_keys((*steps)[i], pptr, {"w", "x0"});
        StepAtom atom;
        atom.w = get_number(member((*steps)[i], pptr, "w"), pptr + "/w");
        atom.x0 = get_number(member((*steps)[i], pptr, "x0"), pptr + "/x0");
        if (atom.w < 0.0) fail(pptr + "/w", "step weight must be non-negative");
        ic[s].steps.push_back(atom);
      }
    }
    if (const json* table = opt_member(j[s], "cdf_table")) {
      const std::string tptr = sptr + "/cdf_table";
      require_object(*table, tptr);
      check_keys(*table, tptr, {"x", "F"});
      const json& xs = member(*table, tptr, "x");
      const json& fs = member(*table, tptr, "F");
      require_array(xs, tptr + "/x");
      require_array(fs, tptr + "/F");
      if (xs.size() != fs.size()) fail(tptr, "x and F must have the same length");
      if (xs.size() < 2) fail(tptr + "/x", "need at least 2 points");
      for (std::size_t i = 0; i < xs.size(); ++i) {
        ic[s].table_x.push_back(get_number(xs[i], tptr + "/x/" + std::to_string(i)));
        ic[s].table_f.push_back(get_number(fs[i], tptr + "/F/" + std::to_string(i)));
      }
      for (std::size_t i = 1; i < ic[s].table_x.size(); ++i) {
        if (!(ic[s].table_x[i] > ic[s].table_x[i - 1]))
          fail(tptr + "/x/" + std::to_string(i), "abscissae must be strictly increasing");
        if (ic[s].table_f[i] < ic[s].table_f[i - 1])
          fail(tptr + "/F/" + std::to_string(i), "values must be non-decreasing");
      }
      if (ic[s].table_f.front() < 0.0) fail(tptr + "/F/0", "values must be non-negative");
    }
  }
  return ic;
}

}  // namespace

RunConfig parse_config(const json& j, const std::string& name) {
  require_object(j, "");
  check_keys(j, "", {"model", "grid", "time", "initial", "snapshots", "mc", "output_dir"});

  RunConfig cfg;
  cfg.name = name;
  cfg.model = parse_model(member(j, "", "model"), "/model");
  {
    const auto violations = validate_model(cfg.model);
    if (!violations.empty()) {
      std::string msg = "config error at /model: validation failed";
      for (const auto& v : violations) msg += "\n  " + v.format();
      throw ConfigError(msg);
    }
  }

  const json& grid = member(j, "", "grid");
  require_object(grid, "/grid");
  check_keys(grid, "/grid", {"domain", "dx", "k"});
  if (const json* dom = opt_member(grid, "domain")) {
    require_array(*dom, "/grid/domain");
    if (dom->size() != 2) fail("/grid/domain", "expected [lo, hi]");
    const double lo = get_number((*dom)[0], "/grid/domain/0");
    const double hi = get_number((*dom)[1], "/grid/domain/1");
    if (!(lo < hi)) fail("/grid/domain", "lo must be below hi");
    cfg.model.domain = {lo, hi};
  }
  const json* dx = opt_member(grid, "dx");
  const json* k = opt_member(grid, "k");
  if ((dx != nullptr) == (k != nullptr))
    fail("/grid", "exactly one of 'dx' and 'k' must be given");

  DomainInfo dom;
  try {
    dom = equilibrium_domain(cfg.model);
  } catch (const ConfigError& e) {
    fail("/grid/domain", std::string("cannot derive a domain: ") + e.what());
  }
  cfg.domain_was_derived = !cfg.model.domain.has_value();
  cfg.model.domain = {dom.lo, dom.hi};
  try {
    if (dx)
      cfg.grid = build_grid_dx(dom.lo, dom.hi, get_number(*dx, "/grid/dx"));
    else
      cfg.grid = build_grid(dom.lo, dom.hi, static_cast<int>(get_integer(*k, "/grid/k")));
  } catch (const ConfigError& e) {
    fail(dx ? "/grid/dx" : "/grid/k", e.what());
  }

  const json& time = member(j, "", "time");
  require_object(time, "/time");
  check_keys(time, "/time", {"T", "dt", "allow_cfl_violation"});
  cfg.T = get_number(member(time, "/time", "T"), "/time/T");
  if (cfg.T < 0.0) fail("/time/T", "horizon must be >= 0");
  if (const json* allow = opt_member(time, "allow_cfl_violation")) {
    if (!allow->is_boolean()) fail("/time/allow_cfl_violation", "expected a boolean");
    cfg.allow_cfl_violation = allow->get<bool>();
  }
  cfg.dt_max = cfl_max_dt(cfg.model, cfg.grid);
  if (const json* dt = opt_member(time, "dt")) {
    cfg.dt = get_number(*dt, "/time/dt");
    if (!(cfg.dt > 0.0)) fail("/time/dt", "time step must be > 0");
  } else {
    if (!std::isfinite(cfg.dt_max))
      fail("/time/dt", "required: the model has no finite stability bound to derive it from");
    cfg.dt = 0.9 * cfg.dt_max;
    cfg.dt_was_auto = true;
  }

  cfg.initial = parse_initial(member(j, "", "initial"), "/initial", cfg.model.states());

  if (const json* snaps = opt_member(j, "snapshots")) {
    require_array(*snaps, "/snapshots");
    for (std::size_t i = 0; i < snaps->size(); ++i) {
      const std::string sptr = "/snapshots/" + std::to_string(i);
      const double t = get_number((*snaps)[i], sptr);
      if (t < 0.0 || t > cfg.T) fail(sptr, "snapshot time must lie in [0, T]");
      if (!cfg.snapshots.empty() && t < cfg.snapshots.back())
        fail(sptr, "snapshot times must be non-decreasing");
      cfg.snapshots.push_back(t);
    }
  }

  if (const json* mc = opt_member(j, "mc")) {
    require_object(*mc, "/mc");
    check_keys(*mc, "/mc", {"n", "seed", "substep"});
    McConfig m;
    const long n = get_integer(member(*mc, "/mc", "n"), "/mc/n");
    if (n < 1) fail("/mc/n", "need at least 1 path");
    m.n = static_cast<std::size_t>(n);
    const json& seed = member(*mc, "/mc", "seed");
    if (!seed.is_number_integer() && !seed.is_number_unsigned())
      fail("/mc/seed", "expected an integer");
    if (seed.is_number_integer() && seed.get<long long>() < 0)
      fail("/mc/seed", "seed must be non-negative");
    m.seed = seed.get<std::uint64_t>();
    if (const json* sub = opt_member(*mc, "substep")) {
      m.substep = get_number(*sub, "/mc/substep");
      if (!(m.substep > 0.0)) fail("/mc/substep", "substep must be > 0");
    }
    cfg.mc = m;
  }

  if (const json* out = opt_member(j, "output_dir"))
    cfg.output_dir = get_string(*out, "/output_dir");

  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j, path.stem().string());
}

nlohmann::json resolved_json(const RunConfig& cfg) {
  json j;
  json states = json::array();
  for (int s = 0; s < cfg.model.states(); ++s)
    states.push_back({{"drift", cfg.model.drifts[s].to_string()}, {"mu", cfg.model.rates[s]}});
  json q = json::array();
  for (int i = 0; i < cfg.model.states(); ++i) {
    json row = json::array();
    for (int c = 0; c < cfg.model.states(); ++c) row.push_back(cfg.model.jump(i, c));
    q.push_back(row);
  }
  j["model"] = {{"states", states}, {"q", q}};
  j["grid"] = {{"domain", {cfg.grid.x_min, cfg.grid.x_max}}, {"k", cfg.grid.count}};
  j["time"] = {{"T", cfg.T}, {"dt", cfg.dt}, {"allow_cfl_violation", cfg.allow_cfl_violation}};
  json initial = json::array();
  for (const auto& st : cfg.initial) {
    json entry = json::object();
    if (!st.steps.empty()) {
      json steps = json::array();
      for (const auto& atom : st.steps) steps.push_back({{"w", atom.w}, {"x0", atom.x0}});
      entry["steps"] = steps;
    }
    if (st.has_table()) entry["cdf_table"] = {{"x", st.table_x}, {"F", st.table_f}};
    initial.push_back(entry);
  }
  j["initial"] = initial;
  j["snapshots"] = cfg.snapshots;
  if (cfg.mc)
    j["mc"] = {{"n", cfg.mc->n}, {"seed", cfg.mc->seed}, {"substep", cfg.mc->substep}};
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace pdmp

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pdmp/model.hpp"
#include "pdmp/solver.hpp"

namespace pdmp {

struct McConfig {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double substep = 1e-2;
};

// Fully resolved run description: every default has been applied (auto step,
// derived domain, realized grid), so serializing and reloading it is a
// fixed point.
struct RunConfig {
  std::string name;  // stem of the source file; used for output naming
  ModelSpec model;
  Grid grid;
  bool domain_was_derived = false;
  double T = 0.0;
  double dt = 0.0;       // resolved; 0.9 * stability bound when not given
  double dt_max = 0.0;
  bool dt_was_auto = false;
  bool allow_cfl_violation = false;
  InitialCondition initial;
  std::vector<double> snapshots;
  std::optional<McConfig> mc;
  std::string output_dir = ".";
};

// Parses and resolves a config object.  Unknown keys, wrong types, missing
// required fields, and model-validation failures all raise ConfigError with
// the JSON pointer of the offending element.
RunConfig parse_config(const nlohmann::json& j, const std::string& name);

// Reads the file, then parse_config.  Parse failures carry the byte offset.
RunConfig load_config(const std::filesystem::path& path);

// Resolved form; parse_config(resolved_json(c)) reproduces c exactly.
nlohmann::json resolved_json(const RunConfig& cfg);

}  // namespace pdmp

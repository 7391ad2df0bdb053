#pragma once

#include <stdexcept>
#include <string>

namespace pdmp {

// Bad input: malformed model, grid, config file, initial data.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Expression evaluation produced a non-finite value.
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Time step rejected by the stability bound.
class CflError : public std::runtime_error {
 public:
  CflError(double dt, double dt_max)
      : std::runtime_error("time step " + std::to_string(dt) +
                           " exceeds stability bound dt_max = " + std::to_string(dt_max) +
                           " (set the unsafe override to force it)"),
        dt_(dt),
        dt_max_(dt_max) {}
  double dt() const { return dt_; }
  double dt_max() const { return dt_max_; }

 private:
  double dt_;
  double dt_max_;
};

}  // namespace pdmp

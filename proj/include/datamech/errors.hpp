#pragma once

#include <stdexcept>
#include <string>

namespace datamech {

// Invalid planner parameters, weights that do not sum, infeasible floors/caps.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent input data (bad JSONL line, missing ids, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: solver non-convergence, training divergence.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Inputs that make a formula undefined (zero denominators and the like).
class DegenerateError : public std::runtime_error {
 public:
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace datamech

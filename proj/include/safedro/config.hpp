#pragma once

#include "safedro/certify.hpp"
#include "safedro/model.hpp"
#include "safedro/search.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace safedro {

/// A config that cannot be read into a RunConfig. `line` is 1-based; 0 when
/// the location is unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

struct RunConfig {
  AmbiguitySpec spec;
  SimpleFunctionSpec fn;
  /// Lattice steps; `solve` uses the first, `sweep` all of them.
  std::vector<double> deltas;
  Tolerances tol;
  SearchOptions search;
  CertifyOptions certify;
  std::string out_dir = "out";
};

/// Parses a step given as a decimal or as a fraction "p/q".
double parse_step(const std::string& text);

/// Reads the JSON document. Syntax and schema errors throw ConfigError with the
/// line of the offending value.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace safedro

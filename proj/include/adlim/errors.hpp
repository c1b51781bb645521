#pragma once
// Error taxonomy shared across the library.  The CLI maps these onto process
// exit codes: ConfigError -> 1, NumericalError -> 2, ThresholdError -> 3.

#include <stdexcept>
#include <string>

namespace adlim {

// Invalid model/config/CLI input: wrong types, out-of-range parameters,
// malformed files.  Always the caller's data, never an internal state.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure left its validated regime: collapsed spectral gap,
// non-convergent eigensolve, violated conservation law, failed resolution
// guard.  Results past this point would be untrustworthy.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configured quality threshold (e.g. a required convergence rate) was not
// met although the computation itself completed.
class ThresholdError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adlim

#pragma once

#include <stdexcept>

namespace kac {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/dimension violations; message names the offending shapes.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid user-supplied value (bad range, zero count, ...).
struct ParameterError : Error {
  using Error::Error;
};

// Misuse of the incremental-training protocol (label outside the
// expanded class range, training before expansion, ...).
struct ProtocolError : Error {
  using Error::Error;
};

// Synthetic-data generation could not satisfy its constraints.
struct GenerationError : Error {
  using Error::Error;
};

// A public operation produced a non-finite value.
struct NumericError : Error {
  using Error::Error;
};

// Malformed experiment config or checkpoint document.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace kac

#pragma once

#include <stdexcept>
#include <string>

namespace splitgan {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible operand shapes; message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Caller violated a documented precondition.
struct ContractError : Error {
  using Error::Error;
};

// NaN or Inf showed up where only finite values are allowed.
struct NumericFault : Error {
  using Error::Error;
};

// Bad configuration file or invalid hyperparameter combination.
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem / stream failures.
struct IoError : Error {
  using Error::Error;
};

// Malformed input file; message carries a line number when known.
struct ParseError : Error {
  using Error::Error;
};

// k-means input has fewer than two distinct rows.
struct DegenerateInputError : ContractError {
  using ContractError::ContractError;
};

// Clustering kept producing an empty cluster; caller should skip the split.
struct SplitInfeasibleError : Error {
  using Error::Error;
};

// Oracle classifier failed its own accuracy gate.
struct OracleQualityError : Error {
  using Error::Error;
};

// Checkpoint written by an unknown format version.
struct CheckpointVersionError : IoError {
  using IoError::IoError;
};

}  // namespace splitgan

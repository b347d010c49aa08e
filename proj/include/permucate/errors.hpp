#pragma once

#include <stdexcept>
#include <string>

namespace permucate {

// Exit codes returned by the command-line tool. Library errors map onto them
// through exit_code().
enum class ExitCode : int {
  ok = 0,
  config = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::numeric; }
};

/// Invalid configuration: unknown key, bad value, violated constraint.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::config; }
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::data; }
};

/// Shapes that do not line up (rows vs. labels, train vs. predict columns).
class DimensionError : public DataError {
 public:
  using DataError::DataError;
};

/// Inputs a learner cannot fit: a single class, fewer than two distinct rows,
/// a cross-fitting fold that lost one treatment arm.
class DegenerateInputError : public DataError {
 public:
  using DataError::DataError;
};

/// Oracle-only quantity requested on data without an oracle.
class MissingOracleError : public DataError {
 public:
  using DataError::DataError;
};

/// Something numerically impossible happened (non-finite fit, failed solve).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace permucate

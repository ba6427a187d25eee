#pragma once

#include <stdexcept>
#include <string>

namespace pevgrid {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (feeder file, CSV, JSON config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a model invariant; message lists every violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unsatisfiable configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class PowerFlowError : public Error {
 public:
  using Error::Error;
};

/// Raised when a load sees a voltage below the collapse floor.
class VoltageCollapse : public PowerFlowError {
 public:
  using PowerFlowError::PowerFlowError;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pevgrid

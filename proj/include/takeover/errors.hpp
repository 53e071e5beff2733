#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace takeover {

/// Base class for every recoverable error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A physical or numerical parameter is outside its domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Configuration content is invalid. `field` is the dotted config path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what),
        field_(std::move(field)),
        message_(what) {}

  const std::string& field() const noexcept { return field_; }
  /// The message without the field prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string field_;
  std::string message_;
};

/// A recursion or simulation left the finite range. `step` is the step
/// index at which the blow-up was detected.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long step)
      : Error(what), step_(step) {}

  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Driver weight estimation could not produce an answer.
class EstimationError : public Error {
 public:
  EstimationError(const std::string& what, double residual = 0.0)
      : Error(what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// The data carry no information about the quantity being estimated.
class UnidentifiableError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// File could not be read or written, or its contents do not match the
/// expected schema.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace takeover

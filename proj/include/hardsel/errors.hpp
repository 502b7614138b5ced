#pragma once

#include <stdexcept>
#include <string>

namespace hardsel {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or caller-supplied argument. CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File missing, unreadable, or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A data file was readable but contained no usable records.
class EmptyPoolError : public Error {
 public:
  using Error::Error;
};

/// Malformed text from a judge, state file or other structured input.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A remote model or embedding endpoint failed. `retryable()` tells the
/// caller whether another attempt may succeed.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

/// A remote peer violated the wire contract (wrong dimension, bad shape).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Raised by a training iteration when the source pool can no longer
/// supply a full diverse subset.
class PhaseComplete : public Error {
 public:
  using Error::Error;
};

}  // namespace hardsel

#pragma once

#include <stdexcept>
#include <string>

namespace csiadv {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked in the wrong lifecycle state (e.g. backward
/// without a recorded forward pass, inference with uninitialized stats).
class StateError : public Error {
 public:
  using Error::Error;
};

/// A caller violated a documented precondition on a model or dataset.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data exists but cannot be processed (e.g. zero dynamic range).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

enum class FormatErrorKind { kIo, kBadMagic, kVersionMismatch, kTruncated, kShapeMismatch };

class FormatError : public Error {
 public:
  FormatError(FormatErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

}  // namespace csiadv

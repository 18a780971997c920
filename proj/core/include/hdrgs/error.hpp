#pragma once

#include <stdexcept>
#include <string>

namespace hdrgs {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Quaternion with zero norm.
class DegenerateRotationError : public Error {
 public:
  using Error::Error;
};

/// Singular or non-finite matrix where an invertible one is required.
class NumericalDegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (log of <= 0 etc.).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Fewer than two distinct exposure times.
class DegenerateExposureError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent configuration (grid layout, loss weights, schedules).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between images or buffers.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during training.
class NumericalAbort : public Error {
 public:
  using Error::Error;
};

/// File or dataset I/O failure.
class IoError : public Error {
 public:
  using Error::Error;
};

class ImageDecodeError : public IoError {
 public:
  using IoError::IoError;
};

class VersionError : public IoError {
 public:
  using IoError::IoError;
};

class MissingFileError : public IoError {
 public:
  using IoError::IoError;
};

class DimensionError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace hdrgs

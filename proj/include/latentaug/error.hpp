#pragma once

#include <stdexcept>
#include <string>

namespace latentaug {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes, axes, or layer geometry.
struct DimensionError : Error {
  using Error::Error;
};

// A value is outside the mathematical domain of an operation
// (log of a non-positive number, alpha outside [0,1], non-finite results).
struct DomainError : Error {
  using Error::Error;
};

// A caller violated an API contract (non-scalar loss, mismatched lengths).
struct ContractError : Error {
  using Error::Error;
};

// A file could not be parsed; the message includes the byte offset.
struct ParseError : Error {
  using Error::Error;
};

// A file has a recognizable but unsupported format version.
struct VersionError : Error {
  using Error::Error;
};

// Too few samples to perform the requested operation.
struct InsufficientDataError : Error {
  using Error::Error;
};

// Invalid dataset content (labels out of range, duplicate ids).
struct DataError : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

// The operation was declined to avoid clobbering existing data.
struct RefusalError : Error {
  using Error::Error;
};

}  // namespace latentaug

#pragma once

#include <stdexcept>
#include <string>

namespace pvae {

// Base class for all library errors. The CLI maps subclasses to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes, or a non-scalar loss passed to backward.
struct ShapeError : Error {
  using Error::Error;
};

// Embedding/token index outside the valid range.
struct IndexError : Error {
  using Error::Error;
};

// An operation produced NaN or Inf (overflow in exp, log of <= 0, divergence).
struct NonFiniteError : Error {
  using Error::Error;
};

// Empty sequence / corpus / record list where at least one element is required.
struct EmptyInputError : Error {
  using Error::Error;
};

// File could not be opened, read or written.
struct IoError : Error {
  using Error::Error;
};

// Malformed input data (too many bad lines, bad JSON, unknown config keys).
struct FormatError : Error {
  using Error::Error;
};

// Checkpoint format version not supported by this build.
struct VersionError : Error {
  using Error::Error;
};

// Checkpoint manifest/payload inconsistency (truncation, checksum failure).
struct CorruptionError : Error {
  using Error::Error;
};

// Invalid configuration value or unsupported request for the chosen variant.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace pvae

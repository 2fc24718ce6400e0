#pragma once

#include <stdexcept>
#include <string>

namespace beatnet {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed text input: header lines, CSV rows, config files.
struct ParseError : Error {
  using Error::Error;
};

// Binary stream problems: unsupported format codes, bad packing, truncation.
struct FormatError : Error {
  using Error::Error;
};

// Tensor dimension disagreements.
struct ShapeError : Error {
  using Error::Error;
};

// Domain violations: constant windows, labels out of range, empty classes.
struct ValueError : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

// Conflicting or unusable command-line / config input.
struct UsageError : Error {
  using Error::Error;
};

// Checkpoint integrity failures, discriminated so callers can tell a wrong
// file apart from a damaged one.
struct CheckpointError : Error {
  enum class Kind {
    BadMagic,
    Truncated,
    ChecksumMismatch,
    FingerprintMismatch,
    BadValue,
  };
  Kind kind;
  CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

// Training aborted because a loss or gradient went non-finite.
struct DivergenceError : Error {
  long long iteration;
  DivergenceError(long long it, const std::string& msg) : Error(msg), iteration(it) {}
};

}  // namespace beatnet

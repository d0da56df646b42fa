#pragma once

#include <stdexcept>
#include <string>

namespace ualign {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree (matrix dims, tensor manifests, config fields).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on argument values is violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// NaN or infinity where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file content: bad magic, wrong version, schema violation.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace ualign

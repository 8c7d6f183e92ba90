#pragma once

#include <stdexcept>
#include <string>

namespace esa {

// Base of every error raised by the library. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidWarp : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

// Numerical breakdown inside an iterative solver (NaN, non-PSD matrix, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace esa

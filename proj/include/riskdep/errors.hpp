#pragma once

#include <stdexcept>
#include <string>

namespace riskdep {

// Bad parameters, dimensions or input values.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A numerical routine could not reach its stated tolerance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system or parse failure while reading/writing artifacts.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace riskdep

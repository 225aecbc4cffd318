#pragma once

#include <stdexcept>
#include <string>

namespace scool {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a special function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed operand: non-finite values, dimension mismatches.
class InputError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

// Non-finite gradient or parameter during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A variational or model parameter left its admissible set.
class InvariantError : public Error {
 public:
  using Error::Error;
};

class DegenerateMembershipError : public Error {
 public:
  using Error::Error;
};

}  // namespace scool

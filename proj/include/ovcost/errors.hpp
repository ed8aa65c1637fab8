#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ovc {

// Base of every error raised by the library. The CLI maps ConstructionBug and
// BoundViolation to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class CapacityNotUniform : public Error {
 public:
  struct Offender {
    std::string context;
    double root;
  };

  CapacityNotUniform(std::string what, std::vector<Offender> offenders)
      : Error(std::move(what)), offenders_(std::move(offenders)) {}

  const std::vector<Offender>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<Offender> offenders_;
};

class EnumerationTooLarge : public Error {
 public:
  using Error::Error;
};

class UnencodableInput : public Error {
 public:
  using Error::Error;
};

class DecodeFailure : public Error {
 public:
  using Error::Error;
};

// Self-check failure inside the coder. Never expected to fire.
class ConstructionBug : public Error {
 public:
  using Error::Error;
};

// An interval comparison landed inside the guard band around equality, so the
// working precision cannot decide it.
class PrecisionGuard : public Error {
 public:
  using Error::Error;
};

class BoundViolation : public Error {
 public:
  using Error::Error;
};

class DegenerateSource : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class BracketNotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace ovc

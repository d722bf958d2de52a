#pragma once

#include <stdexcept>
#include <string>

namespace pdnac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller passed an out-of-range id, a mismatched dimension, or a bad option.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A data object (model, policy, config) breaks one of its stated invariants.
/// The message names the invariant.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

/// The chain induced by a policy is reducible or periodic.
class ErgodicityError : public Error {
 public:
  using Error::Error;
};

/// The constrained linear program has no feasible point.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Mixing time search hit its step cap.
class MixingCapExceeded : public Error {
 public:
  using Error::Error;
};

/// Natural gradient is not in the range of the Fisher matrix.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized input. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0) : Error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace pdnac

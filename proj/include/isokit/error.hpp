#pragma once

#include <stdexcept>
#include <string>

namespace isokit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed model file or unreadable input.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a model invariant (zero mass, negative rate, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its domain (recurrent model where a
/// transient one is required, nonpositive rate parameter, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Enumeration request larger than the configured cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// A point index does not name a state of the kernel.
class UnknownState : public Error {
 public:
  using Error::Error;
};

/// Diagonal load too large for the Neumann series / determinant formulas.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double spectral_radius)
      : Error(what), spectral_radius_(spectral_radius) {}

  double spectral_radius() const noexcept { return spectral_radius_; }

 private:
  double spectral_radius_;
};

}  // namespace isokit

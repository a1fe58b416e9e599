#pragma once

#include <stdexcept>
#include <string>

namespace qdparity {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Integrator step too coarse for the generator it is asked to propagate.
class StepSizeError : public Error {
 public:
  using Error::Error;
};

/// Device parameters outside the regime where the parity measurement works.
class RegimeViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace qdparity

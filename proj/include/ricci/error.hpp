#pragma once

#include <stdexcept>
#include <string>

namespace ricci {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad resolution, negative radius, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The requested operation has no meaning for this manifold family.
class Unsupported : public Error {
 public:
  using Error::Error;
};

/// A metric is (numerically) not positive definite.
class DegenerateMetric : public Error {
 public:
  using Error::Error;
};

/// Raised by the integrator when the metric degenerates or curvature explodes.
class CurvatureBlowup : public Error {
 public:
  using Error::Error;
};

}  // namespace ricci

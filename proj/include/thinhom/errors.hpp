#pragma once

#include <stdexcept>
#include <string>

namespace thinhom {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nearest-point projection queried at a medial-axis point (sphere center,
/// torus axis, a point on the torus major circle).
class AmbiguousProjection : public Error {
 public:
  using Error::Error;
};

/// A point handed to tangent_frame (or a nodal value of a manifold-valued
/// field) violates the defining equation beyond tolerance.
class NotOnManifold : public Error {
 public:
  using Error::Error;
};

class IncompatibleBC : public Error {
 public:
  using Error::Error;
};

class ScaleMismatch : public Error {
 public:
  using Error::Error;
};

/// Cell problem data is inconsistent (e.g. xi_alpha not tangent).
class IncompatibleProblem : public Error {
 public:
  using Error::Error;
};

/// Gradient of |g|^p requested at g = 0 with p < 2 and no regularization.
class NonSmoothPoint : public Error {
 public:
  using Error::Error;
};

/// A field handed to the film energy violates the lateral boundary datum.
class BCViolation : public Error {
 public:
  using Error::Error;
};

/// Recovery-sequence smallness condition failed for the requested h.
class PreconditionViolated : public Error {
 public:
  using Error::Error;
};

/// Requested point lies outside a density table (beyond the allowed margin).
class OutOfTableRange : public Error {
 public:
  using Error::Error;
};

/// Config document violates the schema; `path` points at the offending key.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

}  // namespace thinhom

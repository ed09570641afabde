#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sppm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameter at an API boundary (gamma <= 0, p outside (0,1], ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A linear system that should be invertible was numerically singular.
class SingularSystem : public Error {
 public:
  using Error::Error;
};

/// A set-valued member was queried at a breakpoint where the element the
/// caller needs is not determined by the canonical selection.
class AmbiguousSelection : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

inline void require_dim(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionMismatch(std::string(what) + ": expected dimension " +
                            std::to_string(want) + ", got " + std::to_string(got));
  }
}

inline void require_positive_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument("stepsize gamma must be positive and finite");
  }
}

}  // namespace sppm

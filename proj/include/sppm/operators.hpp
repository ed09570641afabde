#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "sppm/types.hpp"

namespace sppm {

/// x -> B x + r.
class AffineOperator {
 public:
  AffineOperator(Matrix linear, Vector offset);

  Index dim() const { return offset_.size(); }
  const Matrix& linear() const { return linear_; }
  const Vector& offset() const { return offset_; }

  Vector evaluate(const Vector& x) const;

 private:
  Matrix linear_;
  Vector offset_;
};

struct ScalarSegment {
  double slope = 0.0;
  double intercept = 0.0;

  double at(double x) const { return slope * x + intercept; }
};

struct JumpInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Maximally monotone set-valued operator on the real line.
///
/// `segments[j]` is the affine piece on the open interval between
/// `breakpoints[j-1]` and `breakpoints[j]` (unbounded at both ends), so there
/// is one more segment than breakpoints. At a breakpoint the operator takes
/// the whole interval between the left and right limits, which is what makes
/// the graph maximal. Construction rejects graphs that are not monotone
/// (negative slope, or a left limit above the right limit).
class PiecewiseScalarOperator {
 public:
  PiecewiseScalarOperator(std::vector<double> breakpoints, std::vector<ScalarSegment> segments);

  Index dim() const { return 1; }
  const std::vector<double>& breakpoints() const { return breakpoints_; }
  const std::vector<ScalarSegment>& segments() const { return segments_; }
  const std::vector<JumpInterval>& jumps() const { return jumps_; }

  /// Index of the breakpoint equal to x, if any.
  std::optional<std::size_t> breakpoint_at(double x) const;

  /// Canonical element of A(x): the segment value, or the jump midpoint.
  double evaluate(double x) const;

  /// Whether `value` belongs to A(x), with an absolute slack `tol`.
  bool contains(double x, double value, double tol = 0.0) const;

  /// Unique x+ with v in x+ + gamma * A(x+).
  double resolvent(double gamma, double v) const;

 private:
  std::vector<double> breakpoints_;
  std::vector<ScalarSegment> segments_;
  std::vector<JumpInterval> jumps_;
};

/// x -> mu (x - center) + offset. The family for which the SPPM bound is an
/// equality.
class ShiftedScalingOperator {
 public:
  ShiftedScalingOperator(double mu, Vector center, Vector offset);

  Index dim() const { return center_.size(); }
  double mu() const { return mu_; }
  const Vector& center() const { return center_; }
  const Vector& offset() const { return offset_; }

  Vector evaluate(const Vector& x) const;
  Vector resolvent(double gamma, const Vector& v) const;

 private:
  double mu_;
  Vector center_;
  Vector offset_;
};

using Operator = std::variant<AffineOperator, PiecewiseScalarOperator, ShiftedScalingOperator>;

Index dimension(const Operator& op);

/// Canonical selection from op(x). Single-valued except at breakpoints of a
/// piecewise member, where the jump midpoint is returned.
Vector evaluate_element(const Operator& op, const Vector& x);

/// (I + gamma op)^{-1}(v). Affine members factorize I + gamma B on every
/// call; use ResolventTable for repeated solves with a fixed gamma.
Vector resolvent(const Operator& op, double gamma, const Vector& v);

/// True when x sits on a breakpoint of a piecewise member.
bool at_breakpoint(const Operator& op, const Vector& x);

/// Checks v - x_plus in gamma * op(x_plus), i.e. that x_plus is the resolvent
/// output for input v.
bool resolvent_consistent(const Operator& op, double gamma, const Vector& v,
                          const Vector& x_plus, double tol);

/// lambda_min of the symmetric part of B; the largest valid strong
/// monotonicity constant. May be <= 0.
double strong_monotonicity_modulus(const AffineOperator& op);

/// Same quantity for any member kind: mu for shifted scalings, the smallest
/// segment slope for piecewise members.
double strong_monotonicity_modulus(const Operator& op);

/// Largest singular value of B.
double lipschitz_constant(const AffineOperator& op);

}  // namespace sppm

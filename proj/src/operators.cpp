#include "sppm/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sppm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Vector scalar_vector(double v) {
  Vector out(1);
  out(0) = v;
  return out;
}

}  // namespace

AffineOperator::AffineOperator(Matrix linear, Vector offset)
    : linear_(std::move(linear)), offset_(std::move(offset)) {
  if (linear_.rows() != linear_.cols()) throw DimensionMismatch("affine operator: B must be square");
  require_dim(offset_.size(), linear_.rows(), "affine operator offset");
  if (offset_.size() == 0) throw InvalidArgument("affine operator: empty dimension");
  if (!linear_.allFinite()) throw InvalidArgument("affine operator: non-finite B");
  require_finite(offset_, "affine operator offset");
}

Vector AffineOperator::evaluate(const Vector& x) const {
  require_dim(x.size(), dim(), "affine evaluate");
  return linear_ * x + offset_;
}

PiecewiseScalarOperator::PiecewiseScalarOperator(std::vector<double> breakpoints,
                                                 std::vector<ScalarSegment> segments)
    : breakpoints_(std::move(breakpoints)), segments_(std::move(segments)) {
  if (segments_.size() != breakpoints_.size() + 1) {
    throw InvalidArgument("piecewise operator: need exactly one more segment than breakpoints");
  }
  for (std::size_t j = 0; j < breakpoints_.size(); ++j) {
    if (!std::isfinite(breakpoints_[j])) throw InvalidArgument("piecewise operator: non-finite breakpoint");
    if (j > 0 && !(breakpoints_[j] > breakpoints_[j - 1])) {
      throw InvalidArgument("piecewise operator: breakpoints must be strictly increasing");
    }
  }
  for (const auto& s : segments_) {
    if (!std::isfinite(s.slope) || !std::isfinite(s.intercept)) {
      throw InvalidArgument("piecewise operator: non-finite segment");
    }
    if (s.slope < 0.0) throw InvalidArgument("piecewise operator: negative slope is not monotone");
  }
  jumps_.reserve(breakpoints_.size());
  for (std::size_t j = 0; j < breakpoints_.size(); ++j) {
    const double t = breakpoints_[j];
    JumpInterval jump{segments_[j].at(t), segments_[j + 1].at(t)};
    if (jump.lo > jump.hi) {
      throw InvalidArgument("piecewise operator: left limit exceeds right limit at breakpoint " +
                            std::to_string(t));
    }
    jumps_.push_back(jump);
  }
}

std::optional<std::size_t> PiecewiseScalarOperator::breakpoint_at(double x) const {
  auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x);
  if (it != breakpoints_.end() && *it == x) return static_cast<std::size_t>(it - breakpoints_.begin());
  return std::nullopt;
}

double PiecewiseScalarOperator::evaluate(double x) const {
  auto it = std::lower_bound(breakpoints_.begin(), breakpoints_.end(), x);
  const auto j = static_cast<std::size_t>(it - breakpoints_.begin());
  if (it != breakpoints_.end() && *it == x) return 0.5 * (jumps_[j].lo + jumps_[j].hi);
  return segments_[j].at(x);
}

bool PiecewiseScalarOperator::contains(double x, double value, double tol) const {
  if (auto j = breakpoint_at(x)) return value >= jumps_[*j].lo - tol && value <= jumps_[*j].hi + tol;
  return std::abs(value - evaluate(x)) <= tol;
}

double PiecewiseScalarOperator::resolvent(double gamma, double v) const {
  require_positive_gamma(gamma);
  // x -> x + gamma A(x) is strictly increasing; breakpoint j maps onto the
  // interval [t + gamma lo, t + gamma hi] and segment j onto the open gap
  // before it.
  double left = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < breakpoints_.size(); ++j) {
    const double t = breakpoints_[j];
    if (v < t + gamma * jumps_[j].lo) {
      const auto& s = segments_[j];
      return std::clamp((v - gamma * s.intercept) / (1.0 + gamma * s.slope), left, t);
    }
    if (v <= t + gamma * jumps_[j].hi) return t;
    left = t;
  }
  const auto& s = segments_.back();
  return std::max((v - gamma * s.intercept) / (1.0 + gamma * s.slope), left);
}

ShiftedScalingOperator::ShiftedScalingOperator(double mu, Vector center, Vector offset)
    : mu_(mu), center_(std::move(center)), offset_(std::move(offset)) {
  if (!(mu_ > 0.0) || !std::isfinite(mu_)) throw InvalidArgument("shifted scaling: mu must be positive");
  require_dim(offset_.size(), center_.size(), "shifted scaling offset");
  if (center_.size() == 0) throw InvalidArgument("shifted scaling: empty dimension");
  require_finite(center_, "shifted scaling center");
  require_finite(offset_, "shifted scaling offset");
}

Vector ShiftedScalingOperator::evaluate(const Vector& x) const {
  require_dim(x.size(), dim(), "shifted scaling evaluate");
  return mu_ * (x - center_) + offset_;
}

Vector ShiftedScalingOperator::resolvent(double gamma, const Vector& v) const {
  require_positive_gamma(gamma);
  require_dim(v.size(), dim(), "shifted scaling resolvent");
  return (v + gamma * mu_ * center_ - gamma * offset_) / (1.0 + gamma * mu_);
}

Index dimension(const Operator& op) {
  return std::visit([](const auto& o) { return o.dim(); }, op);
}

Vector evaluate_element(const Operator& op, const Vector& x) {
  return std::visit(Overloaded{
                        [&](const AffineOperator& a) { return a.evaluate(x); },
                        [&](const PiecewiseScalarOperator& p) {
                          require_dim(x.size(), 1, "piecewise evaluate");
                          return scalar_vector(p.evaluate(x(0)));
                        },
                        [&](const ShiftedScalingOperator& s) { return s.evaluate(x); },
                    },
                    op);
}

Vector resolvent(const Operator& op, double gamma, const Vector& v) {
  require_positive_gamma(gamma);
  return std::visit(
      Overloaded{
          [&](const AffineOperator& a) -> Vector {
            require_dim(v.size(), a.dim(), "affine resolvent");
            Matrix system = Matrix::Identity(a.dim(), a.dim()) + gamma * a.linear();
            Eigen::PartialPivLU<Matrix> lu(system);
            if (!(lu.rcond() > 1e-14)) throw SingularSystem("resolvent: I + gamma B is numerically singular");
            return lu.solve(v - gamma * a.offset());
          },
          [&](const PiecewiseScalarOperator& p) -> Vector {
            require_dim(v.size(), 1, "piecewise resolvent");
            return scalar_vector(p.resolvent(gamma, v(0)));
          },
          [&](const ShiftedScalingOperator& s) -> Vector { return s.resolvent(gamma, v); },
      },
      op);
}

bool at_breakpoint(const Operator& op, const Vector& x) {
  const auto* p = std::get_if<PiecewiseScalarOperator>(&op);
  return p != nullptr && x.size() == 1 && p->breakpoint_at(x(0)).has_value();
}

bool resolvent_consistent(const Operator& op, double gamma, const Vector& v, const Vector& x_plus,
                          double tol) {
  require_positive_gamma(gamma);
  const Vector element = (v - x_plus) / gamma;
  if (const auto* p = std::get_if<PiecewiseScalarOperator>(&op)) {
    return p->contains(x_plus(0), element(0), tol);
  }
  return (element - evaluate_element(op, x_plus)).norm() <= tol * (1.0 + element.norm());
}

double strong_monotonicity_modulus(const AffineOperator& op) {
  const Matrix sym = 0.5 * (op.linear() + op.linear().transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double strong_monotonicity_modulus(const Operator& op) {
  return std::visit(Overloaded{
                        [](const AffineOperator& a) { return strong_monotonicity_modulus(a); },
                        [](const PiecewiseScalarOperator& p) {
                          double m = std::numeric_limits<double>::infinity();
                          for (const auto& s : p.segments()) m = std::min(m, s.slope);
                          return m;
                        },
                        [](const ShiftedScalingOperator& s) { return s.mu(); },
                    },
                    op);
}

double lipschitz_constant(const AffineOperator& op) {
  Eigen::JacobiSVD<Matrix> svd(op.linear());
  return svd.singularValues()(0);
}

}  // namespace sppm

#include "sppm/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sppm {

OperatorEnsemble::OperatorEnsemble(std::vector<Operator> members, std::vector<double> weights,
                                   std::optional<Vector> root)
    : members_(std::move(members)), weights_(std::move(weights)), root_(std::move(root)) {
  if (members_.empty()) throw InvalidArgument("ensemble: at least one member required");
  const std::size_t n = members_.size();
  dim_ = dimension(members_.front());
  for (const auto& m : members_) require_dim(dimension(m), dim_, "ensemble member");

  if (weights_.empty()) {
    weights_.assign(n, 1.0 / static_cast<double>(n));
  } else {
    if (weights_.size() != n) throw InvalidArgument("ensemble: one weight per member required");
    for (double w : weights_) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("ensemble: weights must be nonnegative");
    }
    const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("ensemble: weights must sum to 1");
  }
  uniform_ = std::all_of(weights_.begin(), weights_.end(),
                         [&](double w) { return w == weights_.front(); });

  cdf_.resize(n);
  std::partial_sum(weights_.begin(), weights_.end(), cdf_.begin());
  cdf_.back() = 1.0;

  if (root_) {
    require_dim(root_->size(), dim_, "ensemble root");
    require_finite(*root_, "ensemble root");
  }

  const bool affine = std::all_of(members_.begin(), members_.end(), [](const Operator& op) {
    return std::holds_alternative<AffineOperator>(op);
  });
  if (affine) {
    Matrix b = Matrix::Zero(dim_, dim_);
    Vector r = Vector::Zero(dim_);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = std::get<AffineOperator>(members_[i]);
      b += weights_[i] * a.linear();
      r += weights_[i] * a.offset();
    }
    mean_linear_ = std::move(b);
    mean_offset_ = std::move(r);
  }
}

std::size_t OperatorEnsemble::sample_index(double u) const {
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) return size() - 1;
  return static_cast<std::size_t>(it - cdf_.begin());
}

const Matrix& OperatorEnsemble::mean_linear() const {
  if (!mean_linear_) throw InvalidArgument("ensemble: mean linear part needs all-affine members");
  return *mean_linear_;
}

const Vector& OperatorEnsemble::mean_offset() const {
  if (!mean_offset_) throw InvalidArgument("ensemble: mean offset needs all-affine members");
  return *mean_offset_;
}

const AffineOperator& OperatorEnsemble::affine_member(std::size_t i) const {
  const auto* a = std::get_if<AffineOperator>(&members_.at(i));
  if (a == nullptr) throw InvalidArgument("ensemble: member is not affine");
  return *a;
}

OperatorEnsemble OperatorEnsemble::with_root(Vector root) const {
  return OperatorEnsemble(members_, weights_, std::move(root));
}

Vector ensemble_mean_element(const OperatorEnsemble& ens, const Vector& x) {
  require_dim(x.size(), ens.dim(), "ensemble mean element");
  if (ens.all_affine()) return ens.mean_linear() * x + ens.mean_offset();
  Vector sum = Vector::Zero(ens.dim());
  for (std::size_t i = 0; i < ens.size(); ++i) sum += ens.weight(i) * evaluate_element(ens.member(i), x);
  return sum;
}

Vector ensemble_root(const OperatorEnsemble& ens) {
  const Matrix& b = ens.mean_linear();
  const Vector& r = ens.mean_offset();
  Eigen::PartialPivLU<Matrix> lu(b);
  if (!(lu.rcond() > 1e-14)) throw SingularSystem("ensemble root: mean linear part is singular");
  Vector x = lu.solve(-r);
  // One refinement step keeps the residual at rounding level even for
  // moderately conditioned means.
  x += lu.solve(-(b * x + r));
  const double residual = (b * x + r).norm();
  if (!(residual <= 1e-10 * (1.0 + r.norm()))) {
    throw SingularSystem("ensemble root: residual too large, mean linear part ill-conditioned");
  }
  return x;
}

Vector solution_of(const OperatorEnsemble& ens) {
  if (ens.root()) return *ens.root();
  return ensemble_root(ens);
}

std::vector<Vector> solution_elements(const OperatorEnsemble& ens, const Vector& x_star) {
  std::vector<Vector> out;
  out.reserve(ens.size());
  for (const auto& m : ens.members()) out.push_back(evaluate_element(m, x_star));
  return out;
}

ResolventTable::ResolventTable(const OperatorEnsemble& ens, double gamma)
    : ens_(&ens), gamma_(gamma) {
  require_positive_gamma(gamma);
  factors_.resize(ens.size());
  const Matrix identity = Matrix::Identity(ens.dim(), ens.dim());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    if (const auto* a = std::get_if<AffineOperator>(&ens.member(i))) {
      Eigen::PartialPivLU<Matrix> lu(identity + gamma * a->linear());
      if (!(lu.rcond() > 1e-14)) throw SingularSystem("resolvent table: I + gamma B_i is singular");
      condition_ = std::max(condition_, 1.0 / lu.rcond());
      factors_[i] = std::move(lu);
    }
  }
}

Vector ResolventTable::apply(std::size_t i, const Vector& v) const {
  if (factors_[i]) {
    require_dim(v.size(), ens_->dim(), "resolvent");
    const auto& a = std::get<AffineOperator>(ens_->member(i));
    return factors_[i]->solve(v - gamma_ * a.offset());
  }
  return resolvent(ens_->member(i), gamma_, v);
}

}  // namespace sppm

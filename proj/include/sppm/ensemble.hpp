#pragma once

#include <optional>
#include <vector>

#include "sppm/operators.hpp"

namespace sppm {

/// Finite family {A_i} with sampling weights on the probability simplex.
/// The mean operator is A = sum_i w_i A_i. Immutable after construction.
class OperatorEnsemble {
 public:
  /// Empty `weights` means uniform. `root`, when given, is a known solution of
  /// 0 in A(x) (set-valued ensembles have no generic root finder).
  explicit OperatorEnsemble(std::vector<Operator> members, std::vector<double> weights = {},
                            std::optional<Vector> root = std::nullopt);

  std::size_t size() const { return members_.size(); }
  Index dim() const { return dim_; }
  const Operator& member(std::size_t i) const { return members_[i]; }
  const std::vector<Operator>& members() const { return members_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }
  bool is_uniform() const { return uniform_; }
  bool all_affine() const { return mean_linear_.has_value(); }
  const std::optional<Vector>& root() const { return root_; }

  /// Inverse-CDF sampling: first index whose cumulative weight exceeds u.
  std::size_t sample_index(double u) const;

  /// Weighted mean of the linear parts and offsets. Only for all-affine
  /// ensembles.
  const Matrix& mean_linear() const;
  const Vector& mean_offset() const;

  const AffineOperator& affine_member(std::size_t i) const;

  OperatorEnsemble with_root(Vector root) const;

 private:
  std::vector<Operator> members_;
  std::vector<double> weights_;
  std::vector<double> cdf_;
  Index dim_ = 0;
  bool uniform_ = true;
  std::optional<Vector> root_;
  std::optional<Matrix> mean_linear_;
  std::optional<Vector> mean_offset_;
};

/// Selection a in A(x) with a = sum_i w_i a_i, each a_i the canonical
/// selection of member i.
Vector ensemble_mean_element(const OperatorEnsemble& ens, const Vector& x);

/// Solves mean_linear * x = -mean_offset. Throws SingularSystem when the mean
/// linear part is not invertible.
Vector ensemble_root(const OperatorEnsemble& ens);

/// The stored root if present, otherwise ensemble_root.
Vector solution_of(const OperatorEnsemble& ens);

/// Canonical a_i* = evaluate_element(A_i, x*) for every member.
std::vector<Vector> solution_elements(const OperatorEnsemble& ens, const Vector& x_star);

/// Resolvents of every member for one fixed stepsize. Affine members are
/// factorized once at construction, so a table is immutable and can be shared
/// between threads. Keeps a reference to the ensemble.
class ResolventTable {
 public:
  ResolventTable(const OperatorEnsemble& ens, double gamma);

  double gamma() const { return gamma_; }
  const OperatorEnsemble& ensemble() const { return *ens_; }

  /// (I + gamma A_i)^{-1}(v).
  Vector apply(std::size_t i, const Vector& v) const;

  /// Largest estimated condition number of the cached factorizations (1 when
  /// no member is affine). Scales the rounding error of `apply`.
  double condition() const { return condition_; }

 private:
  const OperatorEnsemble* ens_;
  double gamma_;
  double condition_ = 1.0;
  std::vector<std::optional<Eigen::PartialPivLU<Matrix>>> factors_;
};

}  // namespace sppm

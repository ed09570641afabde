#include "sppm/problems.hpp"

#include <cmath>

namespace sppm {

void validate(const SaddleSpec& spec) {
  if (spec.n < 1) throw InvalidArgument("saddle spec: n must be at least 1");
  if (spec.d_y < 1) throw InvalidArgument("saddle spec: d_y must be at least 1");
  if (spec.d_z < 1) throw InvalidArgument("saddle spec: d_z must be at least 1");
  if (!(spec.eig_base > 0.0)) throw InvalidArgument("saddle spec: eig_base must be positive");
  if (!(spec.normal_var >= 0.0)) throw InvalidArgument("saddle spec: normal_var must be >= 0");
  if (!std::isfinite(spec.normal_mean)) throw InvalidArgument("saddle spec: normal_mean not finite");
}

Matrix random_orthogonal(Index d, Rng& rng) {
  if (d < 1) throw InvalidArgument("random_orthogonal: d must be at least 1");
  Matrix g(d, d);
  // column-major fill, one normal per entry
  for (Index j = 0; j < d; ++j) {
    for (Index i = 0; i < d; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

Matrix random_matrix_with_spectrum(const std::vector<double>& eigenvalues, Rng& rng) {
  const Index d = static_cast<Index>(eigenvalues.size());
  const Matrix q = random_orthogonal(d, rng);
  Vector lambda(d);
  for (Index i = 0; i < d; ++i) lambda(i) = eigenvalues[static_cast<std::size_t>(i)];
  const Matrix m = q * lambda.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

OperatorEnsemble generate_saddle_instance(const SaddleSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  std::vector<double> eig_y, eig_z;
  for (Index l = 0; l < spec.d_y; ++l) eig_y.push_back(std::pow(spec.eig_base, double(l)));
  for (Index l = 0; l < spec.d_z; ++l) eig_z.push_back(std::pow(spec.eig_base, double(l)));
  const double sd = std::sqrt(spec.normal_var);
  const Index d = spec.d_y + spec.d_z;

  std::vector<Operator> members;
  members.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Matrix m = random_matrix_with_spectrum(eig_y, rng);
    const Matrix nz = random_matrix_with_spectrum(eig_z, rng);
    Matrix q(spec.d_z, spec.d_y);
    for (Index c = 0; c < spec.d_y; ++c) {
      for (Index r = 0; r < spec.d_z; ++r) q(r, c) = rng.normal();
      q.col(c).normalize();
    }
    Vector offset(d);
    for (Index k = 0; k < d; ++k) offset(k) = spec.normal_mean + sd * rng.normal();

    Matrix b(d, d);
    b.topLeftCorner(spec.d_y, spec.d_y) = m;
    b.topRightCorner(spec.d_y, spec.d_z) = q.transpose();
    b.bottomLeftCorner(spec.d_z, spec.d_y) = -q;
    b.bottomRightCorner(spec.d_z, spec.d_z) = nz;
    members.emplace_back(AffineOperator(std::move(b), std::move(offset)));
  }
  OperatorEnsemble ens(std::move(members));
  return ens.with_root(ensemble_root(ens));
}

OperatorEnsemble build_two_piece_example() {
  PiecewiseScalarOperator a1({1.0}, {{0.0, 1.0}, {0.0, 3.0}});
  PiecewiseScalarOperator a2({1.0}, {{4.0, -7.0}, {4.0, -5.0}});
  Vector root(1);
  root << 1.0;
  return OperatorEnsemble({a1, a2}, {}, root);
}

OperatorEnsemble build_tightness_instance(double mu, const Vector& x_star,
                                          const std::vector<Vector>& offsets) {
  if (!(mu > 0.0)) throw InvalidArgument("tightness instance: mu must be positive");
  if (offsets.empty()) throw InvalidArgument("tightness instance: need at least one offset");
  Vector mean = Vector::Zero(x_star.size());
  double scale = 1.0;
  for (const auto& a : offsets) {
    require_dim(a.size(), x_star.size(), "offset");
    mean += a;
    scale = std::max(scale, a.norm());
  }
  mean /= static_cast<double>(offsets.size());
  if (mean.norm() > 1e-12 * scale) {
    throw InvalidArgument("tightness instance: offsets must average to zero");
  }
  std::vector<Operator> members;
  for (const auto& a : offsets) members.emplace_back(ShiftedScalingOperator(mu, x_star, a));
  return OperatorEnsemble(std::move(members), {}, x_star);
}

}  // namespace sppm

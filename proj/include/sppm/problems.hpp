#pragma once

#include <vector>

#include "sppm/ensemble.hpp"
#include "sppm/rng.hpp"

namespace sppm {

/// Quadratic saddle-point family: member i is
///   B_i = [[M_i, Q_i^T], [-Q_i, N_i]],  r_i = (b_i, c_i),
/// with spec(M_i) = {eig_base^0 .. eig_base^(d_y-1)}, spec(N_i) likewise up to
/// d_z, Q_i a d_z x d_y standard-normal matrix with unit-norm columns and
/// b_i, c_i entrywise Normal(normal_mean, normal_var).
struct SaddleSpec {
  std::size_t n = 200;
  Index d_y = 3;
  Index d_z = 4;
  std::uint64_t seed = 0;
  double eig_base = 10.0;
  double normal_mean = 1.0;
  double normal_var = 5.0;
};

void validate(const SaddleSpec& spec);

/// Haar-distributed orthogonal matrix: QR of a standard-normal matrix with
/// the signs of diag(R) folded into Q.
Matrix random_orthogonal(Index d, Rng& rng);

/// Q diag(eigenvalues) Q^T, symmetrized to remove rounding asymmetry.
Matrix random_matrix_with_spectrum(const std::vector<double>& eigenvalues, Rng& rng);

/// Draw order per member: M_i, N_i, Q_i, b_i, c_i. The ensemble stores its
/// computed root.
OperatorEnsemble generate_saddle_instance(const SaddleSpec& spec);

/// Two set-valued operators on the real line with mean 2x - 3 (x < 1),
/// [-1, 1] (x = 1), 2x - 1 (x > 1). Root 1.
OperatorEnsemble build_two_piece_example();

/// Members x -> mu (x - x_star) + offsets[i], uniform weights. Offsets must
/// average to zero.
OperatorEnsemble build_tightness_instance(double mu, const Vector& x_star,
                                          const std::vector<Vector>& offsets);

}  // namespace sppm

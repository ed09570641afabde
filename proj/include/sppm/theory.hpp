#pragma once

#include <optional>
#include <vector>

#include "sppm/ensemble.hpp"
#include "sppm/states.hpp"

namespace sppm {

/// Contraction data for one method at one stepsize. For the variance-reduced
/// methods `branch_resolvent` is 1/(1+gamma mu) and `branch_variance` the
/// second entry of the max; both are NaN for SPPM and SPPM-OC.
struct RateReport {
  double gamma = 0.0;
  double contraction_factor = 1.0;
  double neighborhood = 0.0;
  double optimal_gamma = 0.0;
  double iteration_complexity_constant = 0.0;
  double branch_resolvent = 0.0;
  double branch_variance = 0.0;
};

/// One-step comparison of an exact conditional expectation (lhs) with the
/// contraction bound (rhs).
struct StepCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool holds = false;
};

/// sum_i w_i |a_i*|^2. Throws when the canonical selections at x_star do not
/// average to zero (x_star is not a root).
double sigma_star_sq(const OperatorEnsemble& ens, const Vector& x_star);

struct SppmBound {
  double exact = 0.0;
  double simplified = 0.0;
};

/// Finite-k bound and its k-independent simplification.
SppmBound sppm_bound(std::int64_t k, double gamma, double mu, double sigma_star_sq,
                     double init_err_sq);

/// SPPM has no optimal stepsize: optimal_gamma is reported as 0 and the
/// neighborhood is gamma sigma*^2 / (2 mu + gamma mu^2).
RateReport sppm_rate(double gamma, double mu, double sigma_star_sq);

// Rates of the variance-reduced methods. An empty gamma selects the optimal
// one; with delta == 0 that is +inf and the factor is reported in the limit.

RateReport sppm_oc_rate(std::optional<double> gamma, double mu, double delta);
RateReport lsvrp_rate(std::optional<double> gamma, double mu, double delta, double p);
RateReport point_saga_rate(std::optional<double> gamma, double mu, double delta_tilde,
                           std::size_t n);

/// Iterations until factor^k * v0 <= target, i.e. ceil(log(target/v0)/log(factor)).
std::int64_t predicted_iterations(double factor, double v0, double target);

double sq_error(const Vector& x, const Vector& x_star);

double lyapunov(const SppmState& s, const Vector& x_star);
double lyapunov(const SppmOcState& s, const Vector& x_star);
/// |x - x*|^2 + (gamma mu / p) |w - x*|^2.
double lyapunov(const LsvrpState& s, const Vector& x_star, double gamma, double mu, double p);
/// |x - x*|^2 + gamma mu sum_i |w_i - x*|^2. Needs shadow points.
double lyapunov(const PointSagaState& s, const Vector& x_star, double gamma, double mu);

// Similarity constants of affine ensembles, D_i = B_i - sum_j w_j B_j.

/// sqrt(sum_i w_i |D_i|^2) with the operator norm. Certifies the expected
/// similarity: |D_i (x - x*)| <= |D_i| |x - x*| termwise.
double estimate_delta_spectral(const OperatorEnsemble& ens);

/// sqrt(sum_i w_i |D_i|): the reading under which a mean of plain norms is
/// quoted as delta. Not a certified constant.
double estimate_delta_plain_norm(const OperatorEnsemble& ens);

/// sqrt(lambda_max(sum_i w_i D_i^T D_i)): the smallest delta satisfying the
/// expected-similarity inequality with canonical selections.
double estimate_delta_affine_exact(const OperatorEnsemble& ens);

/// Smallest delta-tilde in the average-similarity inequality
///   (1/n) sum_i |a_i - mean_j a_j - a_i*|^2 <= (delta~^2 / n) sum_i |x_i - x*|^2
/// for a uniform affine ensemble: sqrt(lambda_max(Bd^T (P (x) I) Bd)) with Bd
/// the block diagonal of the B_i and P the centering projector. Dense in n d.
/// Unlike the expected-similarity constants this does not vanish for
/// identical members (it equals |B| there).
double estimate_delta_tilde_affine_exact(const OperatorEnsemble& ens);

/// Lower bound on delta-tilde from probe sets (one point per member).
double empirical_average_similarity(const OperatorEnsemble& ens, const Vector& x_star,
                                    const std::vector<std::vector<Vector>>& probe_sets);

/// max over probes x != x* of sqrt(sum_i w_i |a_i(x) - a(x) - a_i*|^2) / |x - x*|.
/// A lower bound on the best delta.
double empirical_similarity(const OperatorEnsemble& ens, const Vector& x_star,
                            const std::vector<Vector>& probes);

/// Smallest per-member strong monotonicity modulus.
double ensemble_modulus(const OperatorEnsemble& ens);

/// Largest per-member Lipschitz constant (affine members only).
double ensemble_lipschitz(const OperatorEnsemble& ens);

struct StepParams {
  double mu = 0.0;
  double delta = 0.0;
  double p = 1.0;
};

// Exact conditional expectations of the next squared error (SPPM, SPPM-OC)
// or Lyapunov value (L-SVRP, Point-SAGA), obtained by enumerating every
// member index and, for L-SVRP, both coin outcomes. The rhs is the method's
// contraction factor applied to the current value. Throws AmbiguousSelection
// when a state other than x* sits on a breakpoint of a piecewise member.

/// rhs = (|x - x*|^2 + gamma^2 sigma*^2) / (1 + gamma mu)^2.
StepCheck verify_step_inequality(const SppmState& s, const ResolventTable& res,
                                 const Vector& x_star, double mu, double sigma_star_sq);
StepCheck verify_step_inequality(const SppmOcState& s, const ResolventTable& res,
                                 const Vector& x_star, const StepParams& params);
StepCheck verify_step_inequality(const LsvrpState& s, const ResolventTable& res,
                                 const Vector& x_star, const StepParams& params);
StepCheck verify_step_inequality(const PointSagaState& s, const ResolventTable& res,
                                 const Vector& x_star, const StepParams& params);

/// E|x^k - x*|^2 for k = 0..iters of SPPM on an ensemble of shifted scalings,
/// computed exactly by propagating the first two moments.
std::vector<double> sppm_exact_expected_sq_error(const OperatorEnsemble& ens,
                                                 const Vector& x_star, const Vector& x0,
                                                 double gamma, std::int64_t iters);

}  // namespace sppm

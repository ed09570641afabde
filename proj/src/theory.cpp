#include "sppm/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <variant>

namespace sppm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void require_mu(double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("mu must be positive and finite");
}

double resolve_gamma(std::optional<double> gamma, double optimal) {
  if (!gamma) return optimal;
  require_positive_gamma(*gamma);
  return *gamma;
}

// Deviations at the level of the rounding in the weighted mean are zeroed, so
// identical members give exactly delta = 0.
std::vector<Matrix> deviations(const OperatorEnsemble& ens) {
  const Matrix& mean = ens.mean_linear();
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor = 64.0 * eps * static_cast<double>(ens.size());
  std::vector<Matrix> out;
  out.reserve(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Matrix& b = ens.affine_member(i).linear();
    Matrix d = b - mean;
    if (d.norm() <= floor * (b.norm() + mean.norm())) d.setZero();
    out.push_back(std::move(d));
  }
  return out;
}

double spectral_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

// Absolute floor for comparisons near 0 <= 0: a resolvent output cannot be
// more accurate than the rounding of its input, whose norm is `scale`.
// Absolute error allowed in a squared distance q whose points carry a
// rounding error of about e each: |(a + e)^2 - a^2| <= 2 e sqrt(q) + e^2.
double rounding_floor(double q, double scale, double condition, Index dim) {
  const double e = 4.0 * std::numeric_limits<double>::epsilon() * condition * (1.0 + scale) *
                   std::sqrt(static_cast<double>(std::max<Index>(1, dim)));
  return 2.0 * e * std::sqrt(std::max(0.0, q)) + e * e;
}

void reject_breakpoint(const OperatorEnsemble& ens, const Vector& x, const Vector& x_star,
                       const char* what) {
  if (x == x_star) return;
  for (const auto& m : ens.members()) {
    if (at_breakpoint(m, x)) {
      throw AmbiguousSelection(std::string(what) +
                               " sits on a breakpoint; the selection there is not unique");
    }
  }
}

// `weight` bounds the total Lyapunov weight on the anchor points; their
// rounding errors add up to sqrt(weight) times that of one point.
StepCheck compare(double lhs, double rhs, double scale, const ResolventTable& res, Index dim,
                  double weight = 1.0) {
  StepCheck c;
  c.lhs = lhs;
  c.rhs = rhs;
  c.slack = rhs - lhs;
  c.holds = lhs <= rhs * (1.0 + 1e-9) +
                       rounding_floor(std::max(lhs, rhs), scale,
                                      res.condition() * std::sqrt(1.0 + weight), dim);
  return c;
}

}  // namespace

double sigma_star_sq(const OperatorEnsemble& ens, const Vector& x_star) {
  require_dim(x_star.size(), ens.dim(), "x_star");
  const auto elems = solution_elements(ens, x_star);
  Vector mean = Vector::Zero(ens.dim());
  double scale = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < elems.size(); ++i) {
    mean += ens.weight(i) * elems[i];
    scale = std::max(scale, elems[i].norm());
    total += ens.weight(i) * elems[i].squaredNorm();
  }
  if (mean.norm() > 1e-8 * std::max(1.0, scale)) {
    throw InvalidArgument("sigma_star_sq: selections at x_star do not average to zero");
  }
  return total;
}

SppmBound sppm_bound(std::int64_t k, double gamma, double mu, double sigma_star_sq,
                     double init_err_sq) {
  require_positive_gamma(gamma);
  require_mu(mu);
  if (k < 0) throw InvalidArgument("sppm_bound: k must be nonnegative");
  const double gm = gamma * mu;
  const double log_factor = -2.0 * static_cast<double>(k) * std::log1p(gm);
  // pow is exact up to its own rounding when 1 + gamma mu is representable;
  // otherwise log1p avoids the rounded base.
  const double base = 1.0 + gm;
  const double decay = base - 1.0 == gm ? std::pow(base, -2.0 * static_cast<double>(k))
                                        : std::exp(log_factor);
  const double one_minus_decay = decay > 0.5 ? -std::expm1(log_factor) : 1.0 - decay;
  const double noise = gamma * gamma * sigma_star_sq;
  SppmBound b;
  b.exact = decay * init_err_sq + one_minus_decay / (gm * (2.0 + gm)) * noise;
  b.simplified = decay * init_err_sq + gamma * sigma_star_sq / (2.0 * mu + gamma * mu * mu);
  return b;
}

RateReport sppm_rate(double gamma, double mu, double sigma_star_sq) {
  require_positive_gamma(gamma);
  require_mu(mu);
  RateReport r;
  r.gamma = gamma;
  r.contraction_factor = 1.0 / ((1.0 + gamma * mu) * (1.0 + gamma * mu));
  r.neighborhood = gamma * sigma_star_sq / (2.0 * mu + gamma * mu * mu);
  r.optimal_gamma = 0.0;
  r.iteration_complexity_constant = 1.0 / (gamma * mu);
  r.branch_resolvent = kNaN;
  r.branch_variance = kNaN;
  return r;
}

RateReport sppm_oc_rate(std::optional<double> gamma, double mu, double delta) {
  require_mu(mu);
  const double d2 = delta * delta;
  RateReport r;
  r.optimal_gamma = d2 > 0.0 ? mu / d2 : kInf;
  r.gamma = resolve_gamma(gamma, r.optimal_gamma);
  if (std::isinf(r.gamma)) {
    r.contraction_factor = d2 / (d2 + mu * mu);
  } else {
    const double g = r.gamma;
    r.contraction_factor = (1.0 + g * g * d2) / ((1.0 + g * mu) * (1.0 + g * mu));
  }
  r.iteration_complexity_constant = d2 / (mu * mu) + 1.0;
  r.branch_resolvent = kNaN;
  r.branch_variance = kNaN;
  return r;
}

RateReport lsvrp_rate(std::optional<double> gamma, double mu, double delta, double p) {
  require_mu(mu);
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("lsvrp_rate: p must lie in (0, 1]");
  const double d2 = delta * delta;
  const double denom = d2 + (1.0 - p) * mu * mu / p;
  RateReport r;
  r.optimal_gamma = denom > 0.0 ? mu / denom : kInf;
  r.gamma = resolve_gamma(gamma, r.optimal_gamma);
  r.iteration_complexity_constant = d2 / (mu * mu) + 1.0 / p;
  if (std::isinf(r.gamma)) {
    r.branch_resolvent = 0.0;
    r.branch_variance = 1.0 - p + d2 * p / (mu * mu);
    r.contraction_factor = (p * d2 + (1.0 - p) * mu * mu) / (p * d2 + mu * mu);
    return r;
  }
  const double g = r.gamma;
  r.branch_resolvent = 1.0 / (1.0 + g * mu);
  r.branch_variance = 1.0 - p + g * d2 * p / (mu * (1.0 + g * mu));
  r.contraction_factor = std::max(r.branch_resolvent, r.branch_variance);
  return r;
}

RateReport point_saga_rate(std::optional<double> gamma, double mu, double delta_tilde,
                           std::size_t n) {
  require_mu(mu);
  if (n < 1) throw InvalidArgument("point_saga_rate: n must be at least 1");
  const double nn = static_cast<double>(n);
  const double d2 = delta_tilde * delta_tilde;
  const double denom = d2 + (nn - 1.0) * mu * mu;
  RateReport r;
  r.optimal_gamma = denom > 0.0 ? mu / denom : kInf;
  r.gamma = resolve_gamma(gamma, r.optimal_gamma);
  r.iteration_complexity_constant = d2 / (mu * mu) + nn;
  if (std::isinf(r.gamma)) {
    r.branch_resolvent = 0.0;
    r.branch_variance = 1.0 - 1.0 / nn + d2 / (nn * mu * mu);
    r.contraction_factor = (d2 + (nn - 1.0) * mu * mu) / (d2 + nn * mu * mu);
    return r;
  }
  const double g = r.gamma;
  r.branch_resolvent = 1.0 / (1.0 + g * mu);
  r.branch_variance = 1.0 - 1.0 / nn + g * d2 / (nn * mu * (1.0 + g * mu));
  r.contraction_factor = std::max(r.branch_resolvent, r.branch_variance);
  return r;
}

std::int64_t predicted_iterations(double factor, double v0, double target) {
  if (!(target > 0.0)) throw InvalidArgument("predicted_iterations: target must be positive");
  if (v0 <= target) return 0;
  if (factor <= 0.0) return 1;
  if (factor >= 1.0) return std::numeric_limits<std::int64_t>::max();
  return static_cast<std::int64_t>(std::ceil(std::log(target / v0) / std::log(factor)));
}

double sq_error(const Vector& x, const Vector& x_star) { return (x - x_star).squaredNorm(); }

double lyapunov(const SppmState& s, const Vector& x_star) { return sq_error(s.x, x_star); }

double lyapunov(const SppmOcState& s, const Vector& x_star) { return sq_error(s.x, x_star); }

double lyapunov(const LsvrpState& s, const Vector& x_star, double gamma, double mu, double p) {
  return sq_error(s.x, x_star) + gamma * mu / p * sq_error(s.w, x_star);
}

double lyapunov(const PointSagaState& s, const Vector& x_star, double gamma, double mu) {
  if (!s.shadow_w) throw InvalidArgument("lyapunov: point-saga state does not track shadow points");
  double table = 0.0;
  for (const auto& w : *s.shadow_w) table += sq_error(w, x_star);
  return sq_error(s.x, x_star) + gamma * mu * table;
}

double estimate_delta_spectral(const OperatorEnsemble& ens) {
  const auto devs = deviations(ens);
  double total = 0.0;
  for (std::size_t i = 0; i < devs.size(); ++i) {
    const double s = spectral_norm(devs[i]);
    total += ens.weight(i) * s * s;
  }
  return std::sqrt(total);
}

double estimate_delta_plain_norm(const OperatorEnsemble& ens) {
  const auto devs = deviations(ens);
  double total = 0.0;
  for (std::size_t i = 0; i < devs.size(); ++i) total += ens.weight(i) * spectral_norm(devs[i]);
  return std::sqrt(total);
}

double estimate_delta_affine_exact(const OperatorEnsemble& ens) {
  const auto devs = deviations(ens);
  Matrix c = Matrix::Zero(ens.dim(), ens.dim());
  for (std::size_t i = 0; i < devs.size(); ++i) c += ens.weight(i) * devs[i].transpose() * devs[i];
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (c + c.transpose()), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double empirical_similarity(const OperatorEnsemble& ens, const Vector& x_star,
                            const std::vector<Vector>& probes) {
  const auto stars = solution_elements(ens, x_star);
  double best = 0.0;
  for (const auto& x : probes) {
    require_dim(x.size(), ens.dim(), "probe");
    const double dist = sq_error(x, x_star);
    if (dist == 0.0) continue;
    const Vector mean = ensemble_mean_element(ens, x);
    const double eps = std::numeric_limits<double>::epsilon();
    double lhs = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const Vector a = evaluate_element(ens.member(i), x);
      const Vector dev = a - mean - stars[i];
      // terms below the rounding of their own inputs count as zero
      const double noise = 64.0 * eps * static_cast<double>(ens.size()) *
                           (a.norm() + mean.norm() + stars[i].norm());
      if (dev.norm() > noise) lhs += ens.weight(i) * dev.squaredNorm();
    }
    best = std::max(best, std::sqrt(lhs / dist));
  }
  return best;
}

double estimate_delta_tilde_affine_exact(const OperatorEnsemble& ens) {
  if (!ens.is_uniform()) throw InvalidArgument("average similarity needs uniform weights");
  const auto n = static_cast<Index>(ens.size());
  const Index d = ens.dim();
  // u_i = B_i e_i with e_i = x_i - x*; the lhs is the centered second moment.
  Matrix m = Matrix::Zero(n * d, n * d);
  for (Index i = 0; i < n; ++i) {
    const Matrix& bi = ens.affine_member(static_cast<std::size_t>(i)).linear();
    for (Index j = 0; j < n; ++j) {
      const Matrix& bj = ens.affine_member(static_cast<std::size_t>(j)).linear();
      m.block(i * d, j * d, d, d) = -(bi.transpose() * bj) / static_cast<double>(n);
    }
    m.block(i * d, i * d, d, d) += bi.transpose() * bi;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
}

double empirical_average_similarity(const OperatorEnsemble& ens, const Vector& x_star,
                                    const std::vector<std::vector<Vector>>& probe_sets) {
  if (!ens.is_uniform()) throw InvalidArgument("average similarity needs uniform weights");
  const auto stars = solution_elements(ens, x_star);
  const double n = static_cast<double>(ens.size());
  double best = 0.0;
  for (const auto& set : probe_sets) {
    if (set.size() != ens.size()) throw DimensionMismatch("probe set needs one point per member");
    std::vector<Vector> a;
    Vector mean = Vector::Zero(ens.dim());
    double dist = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) {
      a.push_back(evaluate_element(ens.member(i), set[i]));
      mean += a.back() / n;
      dist += sq_error(set[i], x_star) / n;
    }
    if (dist == 0.0) continue;
    double lhs = 0.0;
    for (std::size_t i = 0; i < set.size(); ++i) lhs += (a[i] - mean - stars[i]).squaredNorm() / n;
    best = std::max(best, std::sqrt(lhs / dist));
  }
  return best;
}

double ensemble_modulus(const OperatorEnsemble& ens) {
  double mu = kInf;
  for (const auto& m : ens.members()) mu = std::min(mu, strong_monotonicity_modulus(m));
  return mu;
}

double ensemble_lipschitz(const OperatorEnsemble& ens) {
  double l = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    l = std::max(l, lipschitz_constant(ens.affine_member(i)));
  }
  return l;
}

StepCheck verify_step_inequality(const SppmState& s, const ResolventTable& res,
                                 const Vector& x_star, double mu, double sigma_star_sq) {
  const auto& ens = res.ensemble();
  reject_breakpoint(ens, s.x, x_star, "sppm iterate");
  double lhs = 0.0;
  for (std::size_t i = 0; i < ens.size(); ++i) {
    lhs += ens.weight(i) * sq_error(res.apply(i, s.x), x_star);
  }
  const double g = res.gamma();
  const double rhs = (sq_error(s.x, x_star) + g * g * sigma_star_sq) /
                     ((1.0 + g * mu) * (1.0 + g * mu));
  return compare(lhs, rhs, std::max(x_star.norm(), s.x.norm()), res, x_star.size());
}

StepCheck verify_step_inequality(const SppmOcState& s, const ResolventTable& res,
                                 const Vector& x_star, const StepParams& params) {
  const auto& ens = res.ensemble();
  reject_breakpoint(ens, s.x, x_star, "sppm-oc iterate");
  const Vector mean = ensemble_mean_element(ens, s.x);
  const double g = res.gamma();
  double lhs = 0.0;
  double scale = x_star.norm();
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Vector v = s.x + g * (evaluate_element(ens.member(i), s.x) - mean);
    scale = std::max(scale, v.norm());
    lhs += ens.weight(i) * sq_error(res.apply(i, v), x_star);
  }
  const double factor = sppm_oc_rate(g, params.mu, params.delta).contraction_factor;
  return compare(lhs, factor * sq_error(s.x, x_star), scale, res, x_star.size());
}

StepCheck verify_step_inequality(const LsvrpState& s, const ResolventTable& res,
                                 const Vector& x_star, const StepParams& params) {
  const auto& ens = res.ensemble();
  reject_breakpoint(ens, s.w, x_star, "l-svrp anchor");
  const double g = res.gamma();
  const double p = params.p;
  const double gm = g * params.mu;
  const double anchor = sq_error(s.w, x_star);
  double lhs = 0.0;
  double scale = x_star.norm();
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const Vector v = s.x + g * (evaluate_element(ens.member(i), s.w) - s.a_bar);
    scale = std::max(scale, v.norm());
    const double e = sq_error(res.apply(i, v), x_star);
    // coin = 1 moves the anchor to x+, coin = 0 keeps it
    lhs += ens.weight(i) * (p * (e + gm / p * e) + (1.0 - p) * (e + gm / p * anchor));
  }
  const double factor = lsvrp_rate(g, params.mu, params.delta, p).contraction_factor;
  return compare(lhs, factor * lyapunov(s, x_star, g, params.mu, p), scale, res,
                 x_star.size(), gm / p);
}

StepCheck verify_step_inequality(const PointSagaState& s, const ResolventTable& res,
                                 const Vector& x_star, const StepParams& params) {
  const auto& ens = res.ensemble();
  if (!s.shadow_w) throw InvalidArgument("verify: point-saga state does not track shadow points");
  const double g = res.gamma();
  const double gm = g * params.mu;
  const std::size_t n = ens.size();
  double table = 0.0;
  std::vector<double> shadow(n);
  for (std::size_t j = 0; j < n; ++j) {
    shadow[j] = sq_error((*s.shadow_w)[j], x_star);
    table += shadow[j];
  }
  double lhs = 0.0;
  double scale = x_star.norm();
  for (std::size_t i = 0; i < n; ++i) {
    const Vector v = s.x + g * (s.table[i] - s.a_bar);
    scale = std::max(scale, v.norm());
    const double e = sq_error(res.apply(i, v), x_star);
    lhs += ens.weight(i) * (e + gm * (table - shadow[i] + e));
  }
  const double factor = point_saga_rate(g, params.mu, params.delta, n).contraction_factor;
  return compare(lhs, factor * lyapunov(s, x_star, g, params.mu), scale, res,
                 x_star.size(), g * params.mu * static_cast<double>(ens.size()));
}

std::vector<double> sppm_exact_expected_sq_error(const OperatorEnsemble& ens,
                                                 const Vector& x_star, const Vector& x0,
                                                 double gamma, std::int64_t iters) {
  require_positive_gamma(gamma);
  require_dim(x0.size(), ens.dim(), "x0");
  require_dim(x_star.size(), ens.dim(), "x_star");
  if (iters < 0) throw InvalidArgument("iters must be nonnegative");
  // Each resolvent is y -> alpha_i y + beta_i in y = x - x*, so the mean m and
  // second moment s = E|y|^2 evolve in closed form.
  std::vector<double> alpha(ens.size());
  std::vector<Vector> beta(ens.size());
  for (std::size_t i = 0; i < ens.size(); ++i) {
    const auto* op = std::get_if<ShiftedScalingOperator>(&ens.member(i));
    if (op == nullptr) throw InvalidArgument("exact SPPM moments need shifted-scaling members");
    alpha[i] = 1.0 / (1.0 + gamma * op->mu());
    beta[i] = op->resolvent(gamma, x_star) - x_star;
  }
  Vector m = x0 - x_star;
  double s = m.squaredNorm();
  std::vector<double> out{s};
  out.reserve(static_cast<std::size_t>(iters) + 1);
  for (std::int64_t k = 0; k < iters; ++k) {
    Vector m_next = Vector::Zero(ens.dim());
    double s_next = 0.0;
    for (std::size_t i = 0; i < ens.size(); ++i) {
      const double w = ens.weight(i);
      m_next += w * (alpha[i] * m + beta[i]);
      s_next += w * (alpha[i] * alpha[i] * s + 2.0 * alpha[i] * m.dot(beta[i]) +
                     beta[i].squaredNorm());
    }
    m = std::move(m_next);
    s = s_next;
    out.push_back(s);
  }
  return out;
}

}  // namespace sppm

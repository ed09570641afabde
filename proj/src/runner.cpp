#include "sppm/runner.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace sppm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Constants {
  double mu = kNaN;
  double delta = kNaN;
  double sigma = kNaN;
};

Constants resolve_constants(const OperatorEnsemble& ens, const RunConfig& c, const Vector& x_star) {
  Constants k;
  if (c.mu) {
    k.mu = *c.mu;
  } else {
    const double mu = ensemble_modulus(ens);
    if (mu > 0.0) k.mu = mu;
  }
  if (c.delta) {
    k.delta = *c.delta;
  } else if (ens.all_affine()) {
    k.delta = estimate_delta_spectral(ens);
  }
  if (c.sigma_star_sq) {
    k.sigma = *c.sigma_star_sq;
  } else {
    try {
      k.sigma = sigma_star_sq(ens, x_star);
    } catch (const InvalidArgument&) {
    }
  }
  return k;
}

double pow_k(double factor, std::int64_t k) { return std::pow(factor, static_cast<double>(k)); }

}  // namespace

std::optional<std::int64_t> Trace::cost_to_reach(double target) const {
  for (const auto& r : rows) {
    if (r.sq_error <= target) return r.member_calls + static_cast<std::int64_t>(n) * r.full_calls;
  }
  return std::nullopt;
}

void validate(const RunConfig& c) {
  require_positive_gamma(c.gamma);
  if (c.algorithm == Algorithm::kLsvrp && !(c.p > 0.0 && c.p <= 1.0)) {
    throw InvalidArgument("p must lie in (0, 1]");
  }
  if (c.iters < 0) throw InvalidArgument("iters must be nonnegative");
  if (c.record_every < 1) throw InvalidArgument("record_every must be at least 1");
  if (c.target_error && !(*c.target_error > 0.0)) {
    throw InvalidArgument("target_error must be positive");
  }
}

Trace run(const OperatorEnsemble& ens, const RunConfig& config) {
  validate(config);
  const ResolventTable res(ens, config.gamma);
  return run(res, config);
}

Trace run(const ResolventTable& res, const RunConfig& config) {
  validate(config);
  const auto& ens = res.ensemble();
  if (res.gamma() != config.gamma) throw InvalidArgument("resolvent table built for another gamma");

  Trace trace;
  trace.algorithm = config.algorithm;
  trace.gamma = config.gamma;
  trace.p = config.algorithm == Algorithm::kLsvrp ? config.p : 1.0;
  trace.seed = config.seed;
  trace.n = ens.size();

  Vector x_star;
  if (config.x_star) {
    x_star = *config.x_star;
    require_dim(x_star.size(), ens.dim(), "x_star");
    const double residual = ensemble_mean_element(ens, x_star).norm();
    if (residual > 1e-6) {
      std::ostringstream msg;
      msg << "supplied x_star has residual |A(x_star)| = " << residual;
      trace.warnings.push_back(msg.str());
    }
  } else {
    x_star = solution_of(ens);
  }
  const Vector x0 = config.x0 ? *config.x0 : Vector::Zero(ens.dim());
  require_dim(x0.size(), ens.dim(), "x0");
  require_finite(x0, "x0");

  const Constants cst = resolve_constants(ens, config, x_star);
  const double g = config.gamma;
  Rng rng(config.seed);
  CallCounter calls;

  SppmState sppm{x0, 0};
  SppmOcState oc{x0, 0};
  LsvrpState lsvrp;
  PointSagaState saga;
  double factor = kNaN;
  switch (config.algorithm) {
    case Algorithm::kSppm:
      break;
    case Algorithm::kSppmOc:
      if (std::isfinite(cst.mu) && std::isfinite(cst.delta)) {
        factor = sppm_oc_rate(g, cst.mu, cst.delta).contraction_factor;
      }
      break;
    case Algorithm::kLsvrp:
      lsvrp = lsvrp_init(ens, x0, calls);
      if (std::isfinite(cst.mu) && std::isfinite(cst.delta)) {
        factor = lsvrp_rate(g, cst.mu, cst.delta, config.p).contraction_factor;
      }
      break;
    case Algorithm::kPointSaga:
      saga = point_saga_init(ens, x0, calls, true);
      if (std::isfinite(cst.mu) && std::isfinite(cst.delta)) {
        factor = point_saga_rate(g, cst.mu, cst.delta, ens.size()).contraction_factor;
      }
      break;
  }

  auto current_x = [&]() -> const Vector& {
    switch (config.algorithm) {
      case Algorithm::kSppm:
        return sppm.x;
      case Algorithm::kSppmOc:
        return oc.x;
      case Algorithm::kLsvrp:
        return lsvrp.x;
      case Algorithm::kPointSaga:
        break;
    }
    return saga.x;
  };
  auto current_v = [&](double err) {
    switch (config.algorithm) {
      case Algorithm::kLsvrp:
        return std::isfinite(cst.mu) ? lyapunov(lsvrp, x_star, g, cst.mu, config.p) : kNaN;
      case Algorithm::kPointSaga:
        return std::isfinite(cst.mu) ? lyapunov(saga, x_star, g, cst.mu) : kNaN;
      default:
        return err;
    }
  };

  const double err0 = sq_error(x0, x_star);
  const double v0 = current_v(err0);
  auto bound_at = [&](std::int64_t k) {
    if (config.algorithm == Algorithm::kSppm) {
      if (!std::isfinite(cst.mu) || !std::isfinite(cst.sigma)) return kNaN;
      return sppm_bound(k, g, cst.mu, cst.sigma, err0).exact;
    }
    return std::isfinite(factor) ? pow_k(factor, k) * v0 : kNaN;
  };
  auto record = [&](std::int64_t k, double err) {
    trace.rows.push_back({k, calls.member_calls, calls.full_calls, err, current_v(err), bound_at(k)});
  };

  auto mark_hit = [&](std::int64_t k) {
    trace.target_cost = calls.cost(ens.size());
    trace.target_iteration = k;
  };
  record(0, err0);
  if (config.target_error && err0 <= *config.target_error) {
    mark_hit(0);
    if (config.stop_at_target) return trace;
  }
  for (std::int64_t k = 1; k <= config.iters; ++k) {
    switch (config.algorithm) {
      case Algorithm::kSppm:
        sppm = sppm_step(sppm, res, rng, calls);
        break;
      case Algorithm::kSppmOc:
        oc = sppm_oc_step(oc, res, rng, calls);
        break;
      case Algorithm::kLsvrp:
        lsvrp = lsvrp_step(lsvrp, res, config.p, rng, calls);
        break;
      case Algorithm::kPointSaga:
        saga = point_saga_step(std::move(saga), res, rng, calls, config.point_saga);
        break;
    }
    const double err = sq_error(current_x(), x_star);
    if (!std::isfinite(err)) throw Error("iterate diverged to a non-finite value");
    const bool hit = config.target_error && !trace.target_cost && err <= *config.target_error;
    if (hit) mark_hit(k);
    if (hit || k % config.record_every == 0 || k == config.iters) record(k, err);
    if (hit && config.stop_at_target) break;
  }
  return trace;
}

}  // namespace sppm

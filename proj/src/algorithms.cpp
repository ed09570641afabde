#include "sppm/algorithms.hpp"

#include <string>

namespace sppm {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kSppm:
      return "sppm";
    case Algorithm::kSppmOc:
      return "sppm-oc";
    case Algorithm::kLsvrp:
      return "lsvrp";
    case Algorithm::kPointSaga:
      return "point-saga";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "sppm") return Algorithm::kSppm;
  if (name == "sppm-oc" || name == "sppm_oc") return Algorithm::kSppmOc;
  if (name == "lsvrp" || name == "l-svrp") return Algorithm::kLsvrp;
  if (name == "point-saga" || name == "point_saga") return Algorithm::kPointSaga;
  throw InvalidArgument("unknown algorithm '" + std::string(name) + "'");
}

SppmState sppm_step(const SppmState& s, const ResolventTable& res, Rng& rng, CallCounter& calls) {
  const std::size_t i = res.ensemble().sample_index(rng.uniform());
  calls.member_calls += 1;
  return {res.apply(i, s.x), s.k + 1};
}

SppmOcState sppm_oc_step(const SppmOcState& s, const ResolventTable& res, Rng& rng,
                         CallCounter& calls) {
  const auto& ens = res.ensemble();
  const std::size_t i = ens.sample_index(rng.uniform());
  const Vector h = evaluate_element(ens.member(i), s.x) - ensemble_mean_element(ens, s.x);
  calls.member_calls += 1;
  calls.full_calls += 1;
  return {res.apply(i, s.x + res.gamma() * h), s.k + 1};
}

LsvrpState lsvrp_init(const OperatorEnsemble& ens, const Vector& x0, CallCounter& calls) {
  require_dim(x0.size(), ens.dim(), "lsvrp x0");
  require_finite(x0, "lsvrp x0");
  calls.full_calls += 1;
  return {x0, x0, ensemble_mean_element(ens, x0), 0};
}

LsvrpState lsvrp_step(const LsvrpState& s, const ResolventTable& res, double p, Rng& rng,
                      CallCounter& calls) {
  if (!(p > 0.0 && p <= 1.0)) throw InvalidArgument("lsvrp: p must lie in (0, 1]");
  const auto& ens = res.ensemble();
  const std::size_t i = ens.sample_index(rng.uniform());
  const Vector h = evaluate_element(ens.member(i), s.w) - s.a_bar;
  LsvrpState next{res.apply(i, s.x + res.gamma() * h), s.w, s.a_bar, s.k + 1};
  calls.member_calls += 1;
  const bool snapshot = p >= 1.0 || rng.uniform() < p;
  if (snapshot) {
    next.w = next.x;
    next.a_bar = ensemble_mean_element(ens, next.x);
    calls.full_calls += 1;
  }
  return next;
}

PointSagaState point_saga_init(const OperatorEnsemble& ens, const Vector& x0, CallCounter& calls,
                               bool track_shadow) {
  if (!ens.is_uniform()) throw InvalidArgument("point-saga: requires uniform member weights");
  require_dim(x0.size(), ens.dim(), "point-saga x0");
  require_finite(x0, "point-saga x0");
  PointSagaState s;
  s.x = x0;
  s.table.reserve(ens.size());
  s.a_bar = Vector::Zero(ens.dim());
  for (const auto& m : ens.members()) {
    s.table.push_back(evaluate_element(m, x0));
    s.a_bar += s.table.back();
  }
  s.a_bar /= static_cast<double>(ens.size());
  calls.member_calls += static_cast<std::int64_t>(ens.size());
  if (track_shadow) s.shadow_w = std::vector<Vector>(ens.size(), x0);
  return s;
}

PointSagaState point_saga_step(PointSagaState next, const ResolventTable& res, Rng& rng,
                               CallCounter& calls, const PointSagaOptions& opts) {
  const auto& ens = res.ensemble();
  const double n = static_cast<double>(ens.size());
  const std::size_t i = ens.sample_index(rng.uniform());
  const Vector h = next.table[i] - next.a_bar;
  const Vector x = next.x;
  next.x = res.apply(i, x + res.gamma() * h);
  calls.member_calls += 1;

  Vector element = (x - next.x) / res.gamma() + h;
  if (opts.check_recovered_element) {
    if (const auto* a = std::get_if<AffineOperator>(&ens.member(i))) {
      const Vector direct = a->evaluate(next.x);
      if ((direct - element).norm() > 1e-9 * (1.0 + direct.norm())) {
        throw Error("point-saga: recovered element disagrees with direct evaluation");
      }
    }
  }
  next.a_bar += (element - next.table[i]) / n;
  next.table[i] = std::move(element);
  if (next.shadow_w) (*next.shadow_w)[i] = next.x;
  next.k += 1;
  next.steps_since_refresh += 1;
  if (opts.refresh_interval > 0 && next.steps_since_refresh >= opts.refresh_interval) {
    Vector mean = Vector::Zero(ens.dim());
    for (const auto& t : next.table) mean += t;
    next.a_bar = mean / n;
    next.steps_since_refresh = 0;
  }
  return next;
}

PointSagaState point_saga_solution_state(const OperatorEnsemble& ens, const Vector& x_star) {
  PointSagaState s;
  s.x = x_star;
  s.table = solution_elements(ens, x_star);
  s.a_bar = Vector::Zero(ens.dim());
  for (const auto& t : s.table) s.a_bar += t;
  s.a_bar /= static_cast<double>(ens.size());
  s.shadow_w = std::vector<Vector>(ens.size(), x_star);
  return s;
}

}  // namespace sppm

#pragma once

#include "sppm/ensemble.hpp"
#include "sppm/rng.hpp"
#include "sppm/states.hpp"

namespace sppm {

// Step functions return the next state. Point-SAGA takes its state by value
// so callers can move the table in. Randomness comes only from `rng`: one
// uniform for the member index, then (L-SVRP only) one uniform for the coin.
// The stepsize is the one the ResolventTable was built for.

/// x+ = J_i(x).
SppmState sppm_step(const SppmState& s, const ResolventTable& res, Rng& rng, CallCounter& calls);

/// h = a_i(x) - a(x); x+ = J_i(x + gamma h). One member call plus one full
/// call per step.
SppmOcState sppm_oc_step(const SppmOcState& s, const ResolventTable& res, Rng& rng,
                         CallCounter& calls);

/// Requires x0 == w0 so the stored a_bar is an element of A(x0) and A(w0) at
/// once. Charges one full call.
LsvrpState lsvrp_init(const OperatorEnsemble& ens, const Vector& x0, CallCounter& calls);

/// h = a_i(w) - a_bar; x+ = J_i(x + gamma h); with probability p the anchor
/// moves to x+ and a_bar is recomputed (one full call). With p == 1 no coin is
/// drawn, so the sample path matches SPPM-OC under the same stream.
LsvrpState lsvrp_step(const LsvrpState& s, const ResolventTable& res, double p, Rng& rng,
                      CallCounter& calls);

struct PointSagaOptions {
  /// Re-evaluate affine members at x+ and compare against the recovered
  /// element (debug only, not charged).
  bool check_recovered_element = false;
  /// Recompute a_bar from the table this often to bound drift.
  std::int64_t refresh_interval = 10000;
};

/// Table filled at x0 (n member calls). Requires uniform weights.
PointSagaState point_saga_init(const OperatorEnsemble& ens, const Vector& x0, CallCounter& calls,
                               bool track_shadow = true);

/// h = table[i] - a_bar; x+ = J_i(x + gamma h); the new table entry
/// (x - x+)/gamma + h lies in A_i(x+) by definition of the resolvent, so no
/// extra call is made.
PointSagaState point_saga_step(PointSagaState s, const ResolventTable& res, Rng& rng,
                               CallCounter& calls, const PointSagaOptions& opts = {});

/// State at the solution: x = x*, table[i] = a_i*, shadows at x*.
PointSagaState point_saga_solution_state(const OperatorEnsemble& ens, const Vector& x_star);

}  // namespace sppm

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sppm/algorithms.hpp"
#include "sppm/theory.hpp"

namespace sppm {

struct RunConfig {
  Algorithm algorithm = Algorithm::kSppm;
  double gamma = 0.0;
  /// Snapshot probability, L-SVRP only.
  double p = 1.0;
  std::int64_t iters = 0;
  std::uint64_t seed = 0;
  /// Defaults to the zero vector. L-SVRP starts with w0 = x0.
  std::optional<Vector> x0;
  /// Supplied solution; computed from the ensemble when absent.
  std::optional<Vector> x_star;

  // Constants for the Lyapunov value and the bound column. Filled from the
  // ensemble when absent and computable (affine members); otherwise the
  // bound column is NaN.
  std::optional<double> mu;
  // For Point-SAGA this is the average-similarity constant; the fallback
  // (spectral expected similarity) does not bound it in general.
  std::optional<double> delta;
  std::optional<double> sigma_star_sq;

  /// The first iterate with sq_error <= target is always recorded and its
  /// call units kept in Trace::target_cost.
  std::optional<double> target_error;
  bool stop_at_target = false;
  /// Record every this many iterations (the final iteration is always kept).
  std::int64_t record_every = 1;
  PointSagaOptions point_saga;
};

struct TraceRow {
  std::int64_t k = 0;
  std::int64_t member_calls = 0;
  std::int64_t full_calls = 0;
  double sq_error = 0.0;
  double lyapunov = 0.0;
  double bound_value = 0.0;

  bool operator==(const TraceRow&) const = default;
};

struct Trace {
  Algorithm algorithm = Algorithm::kSppm;
  double gamma = 0.0;
  double p = 1.0;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::vector<TraceRow> rows;
  std::vector<std::string> warnings;
  std::optional<std::int64_t> target_cost;
  std::optional<std::int64_t> target_iteration;

  /// Call units of the first recorded row with sq_error <= target, if any.
  std::optional<std::int64_t> cost_to_reach(double target) const;
};

/// Throws InvalidArgument on gamma <= 0, p outside (0, 1], iters < 0 or
/// record_every < 1.
void validate(const RunConfig& config);

/// Runs one trajectory. Deterministic in (ensemble, config).
Trace run(const OperatorEnsemble& ens, const RunConfig& config);

/// Same, reusing a resolvent table built for config.gamma.
Trace run(const ResolventTable& res, const RunConfig& config);

}  // namespace sppm

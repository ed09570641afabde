#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sppm/types.hpp"

namespace sppm {

enum class Algorithm { kSppm, kSppmOc, kLsvrp, kPointSaga };

std::string_view to_string(Algorithm a);

/// Accepts "sppm", "sppm-oc", "lsvrp" / "l-svrp", "point-saga".
Algorithm parse_algorithm(std::string_view name);

/// Operator-call accounting: 1 unit per member evaluation or member
/// resolvent, n units per evaluation of the mean operator.
struct CallCounter {
  std::int64_t member_calls = 0;
  std::int64_t full_calls = 0;

  std::int64_t cost(std::size_t n) const {
    return member_calls + static_cast<std::int64_t>(n) * full_calls;
  }
};

struct SppmState {
  Vector x;
  std::int64_t k = 0;
};

struct SppmOcState {
  Vector x;
  std::int64_t k = 0;
};

/// `a_bar` is the stored element of A(w), refreshed whenever the anchor moves.
struct LsvrpState {
  Vector x;
  Vector w;
  Vector a_bar;
  std::int64_t k = 0;
};

/// One stored element per member plus their running mean. `shadow_w[i]` is
/// the point where `table[i]` was taken; the algorithm never reads it, it is
/// kept only for the Lyapunov function and consistency checks.
struct PointSagaState {
  Vector x;
  std::vector<Vector> table;
  Vector a_bar;
  std::optional<std::vector<Vector>> shadow_w;
  std::int64_t k = 0;
  std::int64_t steps_since_refresh = 0;
};

}  // namespace sppm

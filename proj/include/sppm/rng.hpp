#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "sppm/types.hpp"

namespace sppm {

/// Seedable, splittable generator shared by every stochastic routine.
///
/// The engine is std::mt19937_64 seeded through std::seed_seq, both of which
/// have fully specified output, so streams are reproducible across standard
/// libraries. Uniforms take the top 53 bits of one engine draw; normals use the
/// Marsaglia polar method on those uniforms (std distributions are avoided
/// because their algorithms are implementation-defined).
class Rng {
 public:
  static constexpr std::string_view kName = "mt19937_64+seed_seq";
  static constexpr std::string_view kNormalMethod = "marsaglia-polar";

  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream, a pure function of (seed, stream).
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform();

  double normal();
  Vector normal_vector(Index d);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sppm

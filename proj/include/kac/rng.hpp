#pragma once

#include <cstdint>

#include "kac/matrix.hpp"

namespace kac {

/// Deterministic pseudo-random generator: xoshiro256** (Blackman/Vigna,
/// public domain) with splitmix64 state expansion from the 64-bit seed.
/// The full sequence is a pure function of the seed; there is no
/// platform- or library-dependent state, so identical seeds reproduce
/// identical experiments everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Integer in [0, n) via the multiply-shift bound (n > 0).
  std::uint64_t next_below(std::uint64_t n);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform double in [lo, hi); throws ParameterError unless lo < hi.
  double uniform(double lo, double hi);

  /// Gaussian via Box-Muller; consumes exactly two 64-bit draws per call.
  double normal(double mean = 0.0, double sd = 1.0);

  /// Derives an independent stream seed from (seed, stream) with a
  /// splitmix64 round; used for per-task / per-purpose sub-generators.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream);

 private:
  std::uint64_t s_[4];
};

/// rows x cols matrix of i.i.d. uniforms on [lo, hi), filled row-major.
Matrix rand_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi);

/// rows x cols matrix of i.i.d. normals, filled row-major.
Matrix rand_normal(Rng& rng, std::size_t rows, std::size_t cols, double mean = 0.0,
                   double sd = 1.0);

}  // namespace kac

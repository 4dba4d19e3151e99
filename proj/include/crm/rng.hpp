#pragma once

#include <array>
#include <cstdint>

namespace crm {

/// Seeded xoshiro256** generator with splittable substreams.
///
/// Every variate generator here is written out explicitly (no std::
/// distributions), so a (seed, stream) pair reproduces the same bits on
/// every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream `stream` derived from `seed`. Stream i of seed s is
  /// the same generator regardless of which thread or in which order it is
  /// created.
  static Rng substream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  /// Standard normal (Marsaglia polar).
  double normal();
  /// Gamma(shape, scale = 1), Marsaglia-Tsang.
  double gamma(double shape);
  double chi_square(double dof);

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; also used to derive per-day and per-draw seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace crm

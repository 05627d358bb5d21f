#pragma once

#include <cstdint>
#include <string_view>

namespace optlab {

// Deterministic splitmix64 stream. Sub-streams are derived by name so the
// data generator, weight init, dropout, shuffling and search each consume
// an independent sequence from one root seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Derives a child stream keyed by label without advancing this stream.
  Rng fork(std::string_view label) const;

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (two uniforms per draw, no caching,
  // so the consumed-state count is call-order independent).
  double normal();

  // Uniform index in [0, n). n must be > 0.
  std::size_t index(std::size_t n);

 private:
  std::uint64_t state_;
};

}  // namespace optlab

#pragma once

#include <cstdint>
#include <random>

#include "cspi/normal.hpp"

namespace cspi {

inline uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic seed derivation for independent sub-streams. Distinct
// (a, b, c) tags yield statistically independent mt19937_64 seeds.
inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0,
                            uint64_t c = 0) {
  uint64_t h = base + 0x9e3779b97f4a7c15ULL;
  h = mix64(h ^ mix64(a + 0x9e3779b97f4a7c15ULL));
  h = mix64(h ^ mix64(b + 0x3c6ef372fe94f82aULL));
  h = mix64(h ^ mix64(c + 0x78dde6e5fd29f05bULL));
  return h;
}

// Seeded generator with fully specified output streams: uniforms come from
// the raw 53-bit mantissa path and normals from the inverse CDF, so results
// do not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // Strictly inside (0, 1): midpoints of the 2^53 dyadic grid.
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return std_normal_quantile(uniform()); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    const uint64_t rem = (UINT64_MAX % n + 1) % n;
    const uint64_t limit = UINT64_MAX - rem;
    uint64_t x = gen_();
    while (x > limit) x = gen_();
    return x % n;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cspi

#ifndef LEVYLAB_RNG_HPP
#define LEVYLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace levylab {

// SplitMix64 (Steele/Lea/Flood splittable generator, Vigna's reference
// mixer). Chosen because the entire sequence is defined by ~5 integer ops,
// so results are bit-identical on every platform, unlike the distributions
// in <random>. All randomness in this project flows through this generator;
// see the README for the exact update function.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on the open interval (0, 1): (k + 0.5) * 2^-53 with k the top
  // 53 bits, so 0 and 1 are never returned and log()/tan() stay finite.
  double uniform01() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Exp(1) via inversion.
  double exponential() { return -std::log(uniform01()); }

  // Standard normal via Box-Muller (sine branch), consuming two uniforms.
  double normal() {
    const double u = uniform01();
    const double v = uniform01();
    return std::sqrt(-2.0 * std::log(u)) * std::sin(6.283185307179586476925286766559 * v);
  }

 private:
  std::uint64_t state_;
};

// Derives an independent substream seed from (seed, stream index) by one
// SplitMix64 step of the xored pair. Chain calls for multi-index derivation:
// derive_seed(derive_seed(s, i), j). Workers in parallel fan-outs get their
// seeds this way, so results do not depend on the schedule.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 g(seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)));
  return g.next();
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(seed, a), b);
}

}  // namespace levylab

#endif  // LEVYLAB_RNG_HPP

#ifndef LEVYLAB_STABLE_HPP
#define LEVYLAB_STABLE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "levylab/rng.hpp"

namespace levylab::stable {

// Parameters of a symmetric alpha-stable law SaS(sigma): characteristic
// function E[exp(i w X)] = exp(-|sigma w|^alpha). alpha = 2 is the Gaussian
// N(0, 2 sigma^2), alpha = 1 the Cauchy with scale sigma.
struct StableParams {
  double alpha = 2.0;
  double sigma = 1.0;

  bool is_gaussian() const { return alpha == 2.0; }
};

// Checks 0 < alpha <= 2 and sigma > 0; throws ParamError naming the
// offending field otherwise.
StableParams validate_params(double alpha, double sigma);

struct SampleBatch {
  std::vector<double> values;
  StableParams params;
  std::uint64_t seed = 0;
};

// Draws one SaS(1) variate from the stream, always consuming exactly two
// uniforms. Chambers-Mallows-Stuck in the symmetric case, with the exact
// alpha = 1 (Cauchy) and alpha = 2 (Box-Muller-equivalent) branches taken
// analytically. The per-alpha constants are precomputed once, so keep one
// sampler per (alpha, loop) in hot paths.
class SasSampler {
 public:
  explicit SasSampler(double alpha);

  double draw(SplitMix64& rng) const;

 private:
  enum class Kind { cauchy, gaussian, general };
  Kind kind_;
  double alpha_ = 0.0;
  double inv_alpha_ = 0.0;
  double exp_ratio_ = 0.0;  // (1 - alpha) / alpha
};

// n i.i.d. SaS(sigma) draws, deterministic given seed. Draws are generated
// at unit scale and multiplied by sigma, so the sequence for (alpha, sigma)
// is exactly sigma times the sequence for (alpha, 1) under the same seed.
// Values are always finite: the astronomically rare draw that overflows
// binary64 is saturated to +/-DBL_MAX.
SampleBatch sample(const StableParams& params, std::size_t n, std::uint64_t seed);

// Fills out with SaS(1) draws from an existing stream.
void sample_unit(double alpha, std::span<double> out, SplitMix64& rng);

// exp(-|sigma w|^alpha), the (real) characteristic function of SaS(sigma).
double char_fn(const StableParams& params, double omega);

// Sample mean of cos(omega * X_i). The imaginary part of the empirical
// characteristic function vanishes by symmetry and is not computed.
double empirical_char_fn(const SampleBatch& batch, double omega);

// True iff E|X|^r is finite: r < alpha, except alpha = 2 where every finite
// moment exists. Requires r >= 0.
bool moment_exists(const StableParams& params, double r);

}  // namespace levylab::stable

#endif  // LEVYLAB_STABLE_HPP

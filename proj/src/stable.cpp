#include "levylab/stable.hpp"

#include <cfloat>
#include <cmath>
#include <numbers>

#include "levylab/errors.hpp"
#include "levylab/numerics.hpp"

namespace levylab::stable {

namespace {

constexpr double kPi = std::numbers::pi;

// Saturate the (probability ~1e-7 even at alpha = 0.02) overflow of the CMS
// transform to the largest finite double, keeping the sign. Downstream code
// may rely on every sample being finite.
inline double clamp_finite(double x) {
  if (std::isinf(x)) return x > 0 ? DBL_MAX : -DBL_MAX;
  return x;
}

}  // namespace

StableParams validate_params(double alpha, double sigma) {
  if (!(alpha > 0.0) || !(alpha <= 2.0))
    throw ParamError("alpha must lie in (0, 2], got " + format_real(alpha));
  if (!(sigma > 0.0) || std::isinf(sigma))
    throw ParamError("sigma must be positive and finite, got " + format_real(sigma));
  return StableParams{alpha, sigma};
}

SasSampler::SasSampler(double alpha) {
  validate_params(alpha, 1.0);
  alpha_ = alpha;
  inv_alpha_ = 1.0 / alpha;
  exp_ratio_ = (1.0 - alpha) / alpha;
  if (alpha == 1.0)
    kind_ = Kind::cauchy;
  else if (alpha == 2.0)
    kind_ = Kind::gaussian;
  else
    kind_ = Kind::general;
}

double SasSampler::draw(SplitMix64& rng) const {
  // V uniform on (-pi/2, pi/2), W ~ Exp(1); both strictly interior because
  // uniform01() never returns 0 or 1.
  const double v = kPi * (rng.uniform01() - 0.5);
  const double w = -std::log(rng.uniform01());
  switch (kind_) {
    case Kind::cauchy:
      return std::tan(v);
    case Kind::gaussian:
      // 2 sin(V) sqrt(W) ~ N(0, 2): sin of a uniform half-circle angle has
      // the same arcsine law as over the full circle.
      return 2.0 * std::sin(v) * std::sqrt(w);
    case Kind::general: {
      const double x = std::sin(alpha_ * v) * std::pow(std::cos(v), -inv_alpha_) *
                       std::pow(std::cos((1.0 - alpha_) * v) / w, exp_ratio_);
      return clamp_finite(x);
    }
  }
  return 0.0;  // unreachable
}

void sample_unit(double alpha, std::span<double> out, SplitMix64& rng) {
  const SasSampler sampler(alpha);
  for (double& x : out) x = sampler.draw(rng);
}

SampleBatch sample(const StableParams& params, std::size_t n, std::uint64_t seed) {
  validate_params(params.alpha, params.sigma);
  if (n == 0) throw DataError("sample: requested an empty batch (n = 0)");
  SampleBatch batch;
  batch.params = params;
  batch.seed = seed;
  batch.values.resize(n);
  SplitMix64 rng(seed);
  sample_unit(params.alpha, batch.values, rng);
  if (params.sigma != 1.0)
    for (double& x : batch.values) x = clamp_finite(x * params.sigma);
  return batch;
}

double char_fn(const StableParams& params, double omega) {
  validate_params(params.alpha, params.sigma);
  return std::exp(-std::pow(std::abs(params.sigma * omega), params.alpha));
}

double empirical_char_fn(const SampleBatch& batch, double omega) {
  if (batch.values.empty()) throw DataError("empirical_char_fn: empty batch");
  KahanSum s;
  for (double x : batch.values) s.add(std::cos(omega * x));
  return s.value() / static_cast<double>(batch.values.size());
}

bool moment_exists(const StableParams& params, double r) {
  validate_params(params.alpha, params.sigma);
  if (r < 0.0) throw ParamError("moment order r must be nonnegative, got " + format_real(r));
  if (params.is_gaussian()) return true;
  return r < params.alpha;
}

}  // namespace levylab::stable

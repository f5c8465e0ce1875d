#ifndef LEVYLAB_META_HPP
#define LEVYLAB_META_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace levylab::meta {

// Ascending local minima m_1 < ... < m_r separated by saddles
// s_1 < ... < s_{r-1}, strictly interleaved; s_0 = -inf and s_r = +inf are
// implicit. Valley i is the interval (s_{i-1}, s_i).
struct Landscape1D {
  std::vector<double> minima;
  std::vector<double> saddles;

  std::size_t wells() const { return minima.size(); }
  // Index of the valley containing w: the number of saddles below w.
  std::size_t valley_of(double w) const;
};

// Validates interleaving and r >= 2; throws ParamError otherwise.
Landscape1D make_landscape(std::span<const double> minima, std::span<const double> saddles);

// Infinitesimal generator of the limiting Markov chain over the minima:
//   q_ij = (1/alpha) | 1/|s_{j-1} - m_i|^alpha - 1/|s_j - m_i|^alpha |,
//   q_ii = -sum_{j != i} q_ij,
// with the infinite boundary saddles contributing zero.
struct GeneratorMatrix {
  std::size_t r = 0;
  double alpha = 0.0;
  std::vector<double> q;  // row-major r x r

  double at(std::size_t i, std::size_t j) const { return q[i * r + j]; }
  // Total exit rate from valley i (equals -q_ii).
  double exit_rate(std::size_t i) const { return -at(i, i); }
};

GeneratorMatrix generator(const Landscape1D& landscape, double alpha);

struct StationaryDist {
  std::vector<double> pi;
};

// Solves Q^T pi = 0 with sum(pi) = 1, pi >= 0 by a dense solve of the
// augmented system (one row replaced by the normalization). Residual is
// checked against 1e-10; failure raises DataError (ill-posed landscape).
StationaryDist stationary(const GeneratorMatrix& gen);

// Closed form for the double well with minima m1 < 0 < m2 and saddle 0:
//   pi1 = |m1|^alpha / (|m1|^alpha + m2^alpha),  pi2 = 1 - pi1.
std::pair<double, double> double_well_pi(double m1, double m2, double alpha);

// Long-run valley occupation of the continuous-time Markov chain simulated
// directly from Q (exponential holding times, jump law q_ij / q_i). An
// independent check on stationary(): no linear algebra, no SDE.
std::vector<double> ctmc_occupation(const GeneratorMatrix& gen, std::size_t jumps,
                                    std::uint64_t seed);

// Largest delta such that every ball B_i = {|w - m_i| <= delta} stays well
// inside its valley: 0.1 times the smallest finite half-width.
double default_delta(const Landscape1D& landscape);

// Gamma(1 + alpha) sin(pi alpha / 2) / pi: the density constant of the
// SaS(1) Levy measure, nu(dy) = jump_rate_constant(alpha) |y|^(-1-alpha) dy.
// The generator's entries are stated for a driver with unit density
// constant, so the SaS-normalized SDE transitions at rate
// jump_rate_constant(alpha) * q_ij * eps^alpha. Vanishes at alpha = 2
// (Brownian motion has no jumps).
double jump_rate_constant(double alpha);

enum class ExitDetection {
  transition,  // first entry into B_j for some j != source (the default)
  first_exit,  // first exit from B_source
};

struct ExitConfig {
  Landscape1D landscape;
  double alpha = 1.5;
  double epsilon = 0.1;
  double eta = 1e-3;
  double delta = 0.0;  // 0 selects default_delta(landscape)
  std::size_t source = 0;
  std::size_t reps = 100;
  std::size_t step_budget = 100'000'000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  ExitDetection detection = ExitDetection::transition;
  double max_drift_step = 0.5;
};

struct ExitSample {
  double time = 0.0;
  std::size_t destination = 0;
  bool censored = false;  // hit the step budget; time is then a lower bound
};

struct ExitStats {
  double alpha = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  std::size_t source = 0;
  std::vector<ExitSample> samples;

  std::size_t censored_count() const;
  // Mean over uncensored samples; censored ones contribute their lower
  // bound, so the result is itself a lower bound on the true mean.
  double mean_time_lower_bound() const;
};

// Runs `reps` independent SDE replicas from w0 = m_source on the polynomial
// potential induced by the landscape, recording the time of first entry
// into another minimum's delta-ball and which one. Replica k uses seed
// derive_seed(seed, k); aggregation is in replica order.
ExitStats exit_times(const ExitConfig& config);

struct ExitLawReport {
  // max over recorded u of [ empirical P(U >= u) - exp(-q_i u) ], where
  // U = jump_rate_constant(alpha) * eps^alpha * T converts the recorded
  // times onto the generator's unit-normalized clock.
  double max_survival_excess = 0.0;
  double dkw95 = 0.0;  // 95% DKW band sqrt(log(2/0.05) / (2 n))
  std::vector<double> dest_frequency;  // empirical destination law (length r)
  std::vector<double> dest_expected;   // q_ij / q_i
  double chi2 = 0.0;                   // goodness-of-fit over destinations
  std::size_t n_uncensored = 0;
  double censored_fraction = 0.0;
};

// Compares the sample against the theory: survival of the rescaled
// transition time versus exp(-q_i u), and destination frequencies versus
// q_ij / q_i. Reports numbers only; thresholds live with the caller.
// Requires at least 90% uncensored samples.
ExitLawReport exit_law_check(const ExitStats& stats, const GeneratorMatrix& gen);

struct OccupationConfig {
  Landscape1D landscape;
  double alpha = 1.5;
  double epsilon = 0.1;
  double eta = 1e-3;
  std::size_t steps = 1'000'000;
  std::size_t start = 0;  // index of the starting minimum
  std::uint64_t seed = 0;
  double max_drift_step = 0.5;
};

// Fraction of time one long SDE trajectory spends in each valley.
std::vector<double> occupation(const OccupationConfig& config);

}  // namespace levylab::meta

#endif  // LEVYLAB_META_HPP

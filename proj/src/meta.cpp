#include "levylab/meta.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "levylab/errors.hpp"
#include "levylab/numerics.hpp"
#include "levylab/rng.hpp"
#include "levylab/sde.hpp"

namespace levylab::meta {

namespace {

constexpr double kPiResidualTol = 1e-10;

// Solves the r x r system A x = b by Gaussian elimination with partial
// pivoting. Fine for the handful of wells this module deals with.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t r) {
  for (std::size_t col = 0; col < r; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < r; ++row)
      if (std::abs(a[row * r + col]) > std::abs(a[pivot * r + col])) pivot = row;
    if (std::abs(a[pivot * r + col]) < 1e-14)
      throw DataError("stationary: singular system (ill-posed landscape)");
    if (pivot != col) {
      for (std::size_t k = col; k < r; ++k) std::swap(a[col * r + k], a[pivot * r + k]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t row = col + 1; row < r; ++row) {
      const double f = a[row * r + col] / a[col * r + col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < r; ++k) a[row * r + k] -= f * a[col * r + k];
      b[row] -= f * b[col];
    }
  }
  std::vector<double> x(r);
  for (std::size_t row = r; row-- > 0;) {
    double acc = b[row];
    for (std::size_t k = row + 1; k < r; ++k) acc -= a[row * r + k] * x[k];
    x[row] = acc / a[row * r + row];
  }
  return x;
}

}  // namespace

std::size_t Landscape1D::valley_of(double w) const {
  std::size_t i = 0;
  while (i < saddles.size() && w > saddles[i]) ++i;
  return i;
}

Landscape1D make_landscape(std::span<const double> minima, std::span<const double> saddles) {
  if (minima.size() < 2)
    throw ParamError("landscape: need at least 2 minima, got " + std::to_string(minima.size()));
  if (saddles.size() + 1 != minima.size())
    throw ParamError("landscape: need exactly r - 1 saddles for r minima");
  for (std::size_t i = 0; i + 1 < minima.size(); ++i) {
    if (!(minima[i] < saddles[i] && saddles[i] < minima[i + 1]))
      throw ParamError("landscape: interleaving m_i < s_i < m_{i+1} violated at index " +
                       std::to_string(i));
  }
  return Landscape1D{{minima.begin(), minima.end()}, {saddles.begin(), saddles.end()}};
}

GeneratorMatrix generator(const Landscape1D& landscape, double alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0))
    throw ParamError("generator: alpha must lie in (0, 2], got " + format_real(alpha));
  make_landscape(landscape.minima, landscape.saddles);  // revalidate interleaving

  const std::size_t r = landscape.wells();
  // 1 / |s - m|^alpha, zero at the infinite boundary saddles.
  auto inv_pow = [&](double s, double m) {
    if (std::isinf(s)) return 0.0;
    return 1.0 / std::pow(std::abs(s - m), alpha);
  };
  auto saddle = [&](std::size_t j) {  // s_j with s_0 = -inf, s_r = +inf
    if (j == 0) return -std::numeric_limits<double>::infinity();
    if (j == r) return std::numeric_limits<double>::infinity();
    return landscape.saddles[j - 1];
  };

  GeneratorMatrix gen;
  gen.r = r;
  gen.alpha = alpha;
  gen.q.assign(r * r, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      if (j == i) continue;
      const double m = landscape.minima[i];
      const double rate =
          std::abs(inv_pow(saddle(j), m) - inv_pow(saddle(j + 1), m)) / alpha;
      gen.q[i * r + j] = rate;
      total += rate;
    }
    gen.q[i * r + i] = -total;
  }
  return gen;
}

StationaryDist stationary(const GeneratorMatrix& gen) {
  const std::size_t r = gen.r;
  if (r < 2) throw ParamError("stationary: generator must have r >= 2");
  // Q^T pi = 0 with the last equation replaced by sum(pi) = 1.
  std::vector<double> a(r * r);
  std::vector<double> b(r, 0.0);
  for (std::size_t i = 0; i + 1 < r; ++i)
    for (std::size_t j = 0; j < r; ++j) a[i * r + j] = gen.at(j, i);
  for (std::size_t j = 0; j < r; ++j) a[(r - 1) * r + j] = 1.0;
  b[r - 1] = 1.0;

  std::vector<double> pi = solve_dense(std::move(a), std::move(b), r);

  double residual = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < r; ++j) row += gen.at(j, i) * pi[j];
    residual = std::max(residual, std::abs(row));
  }
  double total = 0.0;
  for (double p : pi) {
    if (p < -1e-12) throw DataError("stationary: negative stationary mass (ill-posed landscape)");
    total += p;
  }
  if (residual > kPiResidualTol || std::abs(total - 1.0) > kPiResidualTol)
    throw DataError("stationary: residual " + format_real(residual) + " exceeds tolerance");
  for (double& p : pi) p = std::max(p, 0.0);
  return StationaryDist{std::move(pi)};
}

std::pair<double, double> double_well_pi(double m1, double m2, double alpha) {
  if (!(m1 < 0.0 && 0.0 < m2))
    throw ParamError("double_well_pi: requires m1 < 0 < m2");
  if (!(alpha > 0.0 && alpha <= 2.0))
    throw ParamError("double_well_pi: alpha must lie in (0, 2]");
  const double a = std::pow(-m1, alpha);
  const double b = std::pow(m2, alpha);
  return {a / (a + b), b / (a + b)};
}

std::vector<double> ctmc_occupation(const GeneratorMatrix& gen, std::size_t jumps,
                                    std::uint64_t seed) {
  const std::size_t r = gen.r;
  if (r < 2) throw ParamError("ctmc_occupation: generator must have r >= 2");
  if (jumps == 0) throw ParamError("ctmc_occupation: need at least one jump");
  SplitMix64 rng(seed);
  std::vector<double> time_in(r, 0.0);
  std::size_t state = 0;
  for (std::size_t k = 0; k < jumps; ++k) {
    const double rate = gen.exit_rate(state);
    time_in[state] += rng.exponential() / rate;
    // Jump: invert the discrete CDF of q_ij / q_i.
    double u = rng.uniform01() * rate;
    std::size_t next = state;
    for (std::size_t j = 0; j < r; ++j) {
      if (j == state) continue;
      u -= gen.at(state, j);
      if (u <= 0.0) {
        next = j;
        break;
      }
    }
    if (next == state) {  // numerical leftover; take the last off-diagonal
      next = state == r - 1 ? r - 2 : r - 1;
    }
    state = next;
  }
  const double total = sum(time_in);
  for (double& t : time_in) t /= total;
  return time_in;
}

double jump_rate_constant(double alpha) {
  if (!(alpha > 0.0 && alpha <= 2.0))
    throw ParamError("jump_rate_constant: alpha must lie in (0, 2]");
  return std::tgamma(1.0 + alpha) * std::sin(1.5707963267948966 * alpha) /
         3.1415926535897932;
}

double default_delta(const Landscape1D& landscape) {
  double half_width = std::numeric_limits<double>::infinity();
  const std::size_t r = landscape.wells();
  for (std::size_t i = 0; i < r; ++i) {
    const double m = landscape.minima[i];
    if (i > 0) half_width = std::min(half_width, m - landscape.saddles[i - 1]);
    if (i < r - 1) half_width = std::min(half_width, landscape.saddles[i] - m);
  }
  return 0.1 * half_width;
}

std::size_t ExitStats::censored_count() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.censored ? 1 : 0;
  return n;
}

double ExitStats::mean_time_lower_bound() const {
  if (samples.empty()) return 0.0;
  KahanSum s;
  for (const auto& sample : samples) s.add(sample.time);
  return s.value() / static_cast<double>(samples.size());
}

ExitStats exit_times(const ExitConfig& config) {
  const Landscape1D& land = config.landscape;
  make_landscape(land.minima, land.saddles);
  if (!(config.alpha > 0.0 && config.alpha <= 2.0))
    throw ParamError("exit_times: alpha must lie in (0, 2]");
  if (!(config.epsilon > 0.0)) throw ParamError("exit_times: epsilon must be positive");
  if (config.source >= land.wells())
    throw ParamError("exit_times: source valley index out of range");
  if (config.reps < 1) throw ParamError("exit_times: reps must be >= 1");

  const double delta = config.delta > 0.0 ? config.delta : default_delta(land);
  // Every ball B_i must stay inside its valley, as the theory requires.
  for (std::size_t i = 0; i < land.wells(); ++i) {
    const double m = land.minima[i];
    if (i > 0 && m - delta <= land.saddles[i - 1])
      throw ParamError("exit_times: delta " + format_real(delta) + " reaches the saddle left of m_" +
                       std::to_string(i + 1));
    if (i < land.wells() - 1 && m + delta >= land.saddles[i])
      throw ParamError("exit_times: delta " + format_real(delta) +
                       " reaches the saddle right of m_" + std::to_string(i + 1));
  }

  const sde::PotentialPtr pot = sde::make_multiwell(land.minima, land.saddles);
  ExitStats stats;
  stats.alpha = config.alpha;
  stats.epsilon = config.epsilon;
  stats.delta = delta;
  stats.source = config.source;
  stats.samples.resize(config.reps);

  parallel_for(config.reps, config.threads, [&](std::size_t rep) {
    const double w0[1] = {land.minima[config.source]};
    sde::Stepper stepper(pot, config.alpha, config.epsilon, config.eta, w0,
                         derive_seed(config.seed, rep), config.max_drift_step);
    ExitSample sample;
    sample.censored = true;
    sample.destination = config.source;
    for (std::size_t k = 0; k < config.step_budget; ++k) {
      stepper.step();
      const double w = stepper.state()[0];
      if (config.detection == ExitDetection::transition) {
        bool done = false;
        for (std::size_t j = 0; j < land.wells(); ++j) {
          if (j == config.source) continue;
          if (std::abs(w - land.minima[j]) <= delta) {
            sample = ExitSample{stepper.time(), j, false};
            done = true;
            break;
          }
        }
        if (done) break;
      } else {
        if (std::abs(w - land.minima[config.source]) > delta) {
          sample = ExitSample{stepper.time(), land.valley_of(w), false};
          break;
        }
      }
    }
    if (sample.censored)
      sample.time = config.eta * static_cast<double>(config.step_budget);
    stats.samples[rep] = sample;
  });
  return stats;
}

ExitLawReport exit_law_check(const ExitStats& stats, const GeneratorMatrix& gen) {
  if (stats.samples.empty()) throw DataError("exit_law_check: no samples");
  const std::size_t n = stats.samples.size();
  const std::size_t censored = stats.censored_count();
  const double censored_fraction =
      static_cast<double>(censored) / static_cast<double>(n);
  if (censored_fraction > 0.10)
    throw DataError("exit_law_check: " + format_real(100.0 * censored_fraction) +
                    "% of samples are censored (need <= 10%)");

  const double qi = gen.exit_rate(stats.source);
  const double scale = jump_rate_constant(stats.alpha) * std::pow(stats.epsilon, stats.alpha);

  ExitLawReport report;
  report.n_uncensored = n - censored;
  report.censored_fraction = censored_fraction;
  report.dkw95 = std::sqrt(std::log(2.0 / 0.05) / (2.0 * static_cast<double>(report.n_uncensored)));

  // Empirical survival of eps^alpha T at each recorded value, against the
  // exponential bound. S(u_k) with u ascending is (n - k) / n just above
  // and (n - k + 1) / n at u_k itself; the latter is the sharper comparison.
  std::vector<double> scaled;
  scaled.reserve(report.n_uncensored);
  for (const auto& s : stats.samples)
    if (!s.censored) scaled.push_back(scale * s.time);
  std::sort(scaled.begin(), scaled.end());
  const auto m = static_cast<double>(scaled.size());
  for (std::size_t k = 0; k < scaled.size(); ++k) {
    const double survival = (m - static_cast<double>(k)) / m;
    const double bound = std::exp(-qi * scaled[k]);
    report.max_survival_excess = std::max(report.max_survival_excess, survival - bound);
  }

  report.dest_frequency.assign(gen.r, 0.0);
  report.dest_expected.assign(gen.r, 0.0);
  for (const auto& s : stats.samples)
    if (!s.censored) report.dest_frequency[s.destination] += 1.0;
  for (double& f : report.dest_frequency) f /= m;
  for (std::size_t j = 0; j < gen.r; ++j)
    if (j != stats.source) report.dest_expected[j] = gen.at(stats.source, j) / qi;

  for (std::size_t j = 0; j < gen.r; ++j) {
    const double expected = report.dest_expected[j] * m;
    if (expected > 0.0) {
      const double diff = report.dest_frequency[j] * m - expected;
      report.chi2 += diff * diff / expected;
    }
  }
  return report;
}

std::vector<double> occupation(const OccupationConfig& config) {
  const Landscape1D& land = config.landscape;
  make_landscape(land.minima, land.saddles);
  if (config.start >= land.wells()) throw ParamError("occupation: start index out of range");
  if (config.steps < 1) throw ParamError("occupation: steps must be >= 1");

  const sde::PotentialPtr pot = sde::make_multiwell(land.minima, land.saddles);
  const double w0[1] = {land.minima[config.start]};
  sde::Stepper stepper(pot, config.alpha, config.epsilon, config.eta, w0, config.seed,
                       config.max_drift_step);
  std::vector<double> counts(land.wells(), 0.0);
  for (std::size_t k = 0; k < config.steps; ++k) {
    stepper.step();
    counts[land.valley_of(stepper.state()[0])] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(config.steps);
  return counts;
}

}  // namespace levylab::meta

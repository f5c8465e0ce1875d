#include "levylab/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "levylab/errors.hpp"
#include "levylab/numerics.hpp"
#include "levylab/rng.hpp"
#include "levylab/stable.hpp"

namespace levylab::estimate {

namespace {

// Zero guard: magnitudes below this are treated as exact zeros (dead
// gradient coordinates) and rejected loudly instead of feeding -inf logs.
constexpr double kZeroGuard = 1e-300;

// Divisor of n closest to sqrt(n), among divisors >= 2; ties go to the
// smaller divisor. Returns 0 if n < 4 or n is prime with n out of window.
std::size_t best_divisor(std::size_t n) {
  const double root = std::sqrt(static_cast<double>(n));
  std::size_t best = 0;
  double best_dist = 0.0;
  for (std::size_t d = 2; d * d <= n; ++d) {
    if (n % d != 0) continue;
    for (std::size_t cand : {d, n / d}) {
      if (cand < 2) continue;
      const double dist = std::abs(static_cast<double>(cand) - root);
      if (best == 0 || dist < best_dist || (dist == best_dist && cand < best)) {
        best = cand;
        best_dist = dist;
      }
    }
  }
  if (best == 0 && n >= 2) {
    // Prime: the only divisor >= 2 is n itself (K2 = 1).
    best = n;
  }
  return best;
}

bool divisor_acceptable(std::size_t n, std::size_t d) {
  const double root = std::sqrt(static_cast<double>(n));
  return static_cast<double>(d) >= root / 4.0 && static_cast<double>(d) <= root * 4.0;
}

}  // namespace

Grouping choose_grouping(std::size_t total) {
  if (total < 4)
    throw DataError("choose_grouping: need at least 4 samples, got " + std::to_string(total));
  for (std::size_t used = total; used >= 4; --used) {
    const std::size_t d = best_divisor(used);
    if (d >= 2 && divisor_acceptable(used, d))
      return Grouping{d, used / d, total - used};
  }
  throw DataError("choose_grouping: no factorable sample count at or below " +
                  std::to_string(total));
}

TailEstimate estimate_alpha(std::span<const double> x, const Grouping& grouping) {
  const std::size_t k1 = grouping.k1;
  const std::size_t k2 = grouping.k2;
  if (k1 < 2 || k2 < 1)
    throw ParamError("estimate_alpha: grouping requires K1 >= 2 and K2 >= 1");
  const std::size_t k = k1 * k2;
  if (x.size() < k)
    throw DataError("estimate_alpha: need " + std::to_string(k) + " samples, got " +
                    std::to_string(x.size()));

  KahanSum log_abs_x;
  KahanSum log_abs_y;
  for (std::size_t i = 0; i < k2; ++i) {
    // Block sums in extended precision: even a block of +/-DBL_MAX entries
    // cannot overflow an 80-bit accumulator.
    long double y = 0.0L;
    for (std::size_t j = 0; j < k1; ++j) {
      const double v = x[i * k1 + j];
      if (!std::isfinite(v))
        throw DataError("estimate_alpha: non-finite sample at index " + std::to_string(i * k1 + j));
      if (std::abs(v) < kZeroGuard)
        throw DataError("estimate_alpha: sample at index " + std::to_string(i * k1 + j) +
                        " is zero (|x| < 1e-300)");
      log_abs_x.add(std::log(std::abs(v)));
      y += v;
    }
    const long double abs_y = y < 0.0L ? -y : y;
    if (abs_y < static_cast<long double>(kZeroGuard))
      throw DataError("estimate_alpha: block sum " + std::to_string(i) +
                      " is zero (|Y| < 1e-300)");
    log_abs_y.add(static_cast<double>(std::log(abs_y)));
  }

  const double inv_alpha = (log_abs_y.value() / static_cast<double>(k2) -
                            log_abs_x.value() / static_cast<double>(k)) /
                           std::log(static_cast<double>(k1));
  TailEstimate est;
  est.inv_alpha_hat = inv_alpha;
  est.alpha_hat = 1.0 / inv_alpha;
  est.grouping = grouping;
  est.out_of_range = !(est.alpha_hat > 0.0 && est.alpha_hat <= 2.0);
  return est;
}

double hill_estimate(std::span<const double> x, std::size_t k) {
  const std::size_t n = x.size();
  if (k < 2 || k >= n)
    throw ParamError("hill_estimate: k must satisfy 2 <= k < n, got k = " + std::to_string(k) +
                     ", n = " + std::to_string(n));
  std::vector<double> mags(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]))
      throw DataError("hill_estimate: non-finite sample at index " + std::to_string(i));
    mags[i] = std::abs(x[i]);
  }
  // Order so the k largest magnitudes sit at the front, threshold at mags[k].
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end(),
                   std::greater<>());
  const double threshold = mags[k];
  if (threshold < kZeroGuard)
    throw DataError("hill_estimate: threshold order statistic is zero");
  KahanSum s;
  for (std::size_t j = 0; j < k; ++j) s.add(std::log(mags[j] / threshold));
  const double mean_log = s.value() / static_cast<double>(k);
  if (mean_log <= 0.0)
    throw DataError("hill_estimate: zero spread in the upper order statistics");
  return 1.0 / mean_log;
}

std::vector<CalibrationRow> calibrate(std::span<const double> alpha_grid, std::size_t k1,
                                      std::size_t k2, std::size_t reps, std::uint64_t seed,
                                      unsigned threads) {
  if (alpha_grid.empty()) throw DataError("calibrate: empty alpha grid");
  for (double a : alpha_grid) stable::validate_params(a, 1.0);
  if (k1 < 2 || k2 < 1 || reps < 1)
    throw ParamError("calibrate: need K1 >= 2, K2 >= 1, reps >= 1");

  const Grouping grouping{k1, k2, 0};
  const std::size_t n_alpha = alpha_grid.size();
  std::vector<double> estimates(n_alpha * reps);

  parallel_for(n_alpha * reps, threads, [&](std::size_t cell) {
    const std::size_t ai = cell / reps;
    const std::size_t rep = cell % reps;
    SplitMix64 rng(derive_seed(seed, ai, rep));
    std::vector<double> draws(k1 * k2);
    stable::sample_unit(alpha_grid[ai], draws, rng);
    estimates[cell] = estimate_alpha(draws, grouping).alpha_hat;
  });

  std::vector<CalibrationRow> rows(n_alpha);
  for (std::size_t ai = 0; ai < n_alpha; ++ai) {
    std::span<const double> cells(estimates.data() + ai * reps, reps);
    KahanSum abs_err;
    for (double e : cells) abs_err.add(std::abs(e - alpha_grid[ai]));
    rows[ai] = CalibrationRow{alpha_grid[ai], mean(cells), stddev(cells),
                              abs_err.value() / static_cast<double>(reps)};
  }
  return rows;
}

}  // namespace levylab::estimate

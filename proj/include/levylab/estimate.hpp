#ifndef LEVYLAB_ESTIMATE_HPP
#define LEVYLAB_ESTIMATE_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace levylab::estimate {

// A K1 x K2 blocking of K1*K2 samples, plus the count of trailing samples
// discarded to reach a factorable total.
struct Grouping {
  std::size_t k1 = 0;       // block (group) size
  std::size_t k2 = 0;       // number of blocks
  std::size_t dropped = 0;  // trailing samples not used

  std::size_t used() const { return k1 * k2; }
  std::size_t total() const { return used() + dropped; }
};

// Picks K1 as the divisor of K' closest to sqrt(K'), ties toward the smaller
// divisor (more blocks, lower estimator variance). K' is the largest total
// <= K whose closest-to-sqrt divisor lies within a factor 4 of sqrt(K');
// the K - K' trailing samples are reported as dropped. Requires K >= 4.
Grouping choose_grouping(std::size_t total);

struct TailEstimate {
  double alpha_hat = 0.0;
  double inv_alpha_hat = 0.0;
  Grouping grouping;
  // Estimation noise can push alpha_hat outside (0, 2]; such results are
  // flagged, never clamped.
  bool out_of_range = false;
};

// The log-moment block estimator of the tail index:
//   Y_i = sum of block i,   i = 1..K2
//   1/alpha_hat = (mean_i log|Y_i| - mean_j log|X_j|) / log K1
// using the first K1*K2 entries of x. Exactly invariant under x -> c*x
// (the log c added to both averages cancels). Any |X| below 1e-300, any
// zero block sum, or any non-finite input raises DataError.
TailEstimate estimate_alpha(std::span<const double> x, const Grouping& grouping);

// Classical Hill estimator from the k largest |X| values:
//   alpha_hat = [ (1/k) sum_{j=1..k} log(|X|_(n-j+1) / |X|_(n-k)) ]^-1
// with ascending order statistics |X|_(.). Requires 2 <= k < n; a
// nonpositive threshold statistic or zero spread raises DataError.
double hill_estimate(std::span<const double> x, std::size_t k);

struct CalibrationRow {
  double alpha = 0.0;           // true tail index
  double mean_alpha_hat = 0.0;  // mean estimate over reps
  double std_alpha_hat = 0.0;   // spread over reps
  double mae = 0.0;             // mean |alpha_hat - alpha|
};

// Monte Carlo calibration: for each alpha in the grid, draws `reps`
// independent batches of k1*k2 SaS(1) samples and estimates alpha from each.
// Cell (i, rep) uses the derived seed derive_seed(seed, i, rep) and results
// are reduced in (i, rep) order, so the output is identical for any thread
// count.
std::vector<CalibrationRow> calibrate(std::span<const double> alpha_grid, std::size_t k1,
                                      std::size_t k2, std::size_t reps, std::uint64_t seed,
                                      unsigned threads = 1);

}  // namespace levylab::estimate

#endif  // LEVYLAB_ESTIMATE_HPP

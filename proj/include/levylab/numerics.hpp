#ifndef LEVYLAB_NUMERICS_HPP
#define LEVYLAB_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace levylab {

// Neumaier-compensated accumulator. Long Monte Carlo reductions (1e7+ terms)
// go through this so totals do not drift with summation length.
class KahanSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double sum(std::span<const double> xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

inline double mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : sum(xs) / static_cast<double>(xs.size());
}

// Two-pass sample variance (denominator n-1 for n > 1).
inline double variance(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  const double m = mean(xs);
  KahanSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / static_cast<double>(n - 1);
}

inline double stddev(std::span<const double> xs) { return std::sqrt(variance(xs)); }

// Linear-interpolation quantile on a copy (R type 7). p in [0, 1].
inline double quantile(std::span<const double> xs, double p) {
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  if (v.size() == 1) return v[0];
  const double h = p * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::span<const double> xs) { return quantile(xs, 0.5); }

// CDF of N(0, 1).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / 1.4142135623730950488); }

// Formats a double with 17 significant digits ("%.17g"), enough to
// round-trip any IEEE-754 binary64 value through text.
std::string format_real(double x);

// Runs body(0..n-1) on up to `threads` workers pulling indices from a shared
// counter. With threads <= 1 this is a plain loop. Callers make results
// schedule-independent by writing into index-addressed slots.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace levylab

#endif  // LEVYLAB_NUMERICS_HPP

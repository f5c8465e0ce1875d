#ifndef LEVYLAB_SDE_HPP
#define LEVYLAB_SDE_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "levylab/rng.hpp"
#include "levylab/stable.hpp"

namespace levylab::sde {

// A differentiable objective. grad must be the exact gradient of value;
// check_gradient() verifies this against central finite differences.
class Potential {
 public:
  virtual ~Potential() = default;
  virtual double value(std::span<const double> w) const = 0;
  virtual void grad(std::span<const double> w, std::span<double> out) const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::string name() const = 0;
};

using PotentialPtr = std::shared_ptr<const Potential>;

// f(w) = |w|^2 / 2.
PotentialPtr make_quadratic(std::size_t dim);

// Quartic double well with f'(w) = w (w - m1) (w - m2) and f(0) = 0.
// Critical points are exactly {m1, 0, m2}: minima at m1 < 0 < m2, maximum
// at the origin. Throws ParamError unless m1 < 0 < m2.
PotentialPtr make_double_well(double m1, double m2);

// One-dimensional potential whose critical points are exactly the given
// ascending minima and saddles (strictly interleaved):
// f'(w) = prod_i (w - m_i) * prod_j (w - s_j), f(0) = 0.
PotentialPtr make_multiwell(std::span<const double> minima, std::span<const double> saddles);

// The two-dimensional valley f(w1, w2) = (w1 w2)^2 whose zero-loss set is
// the union of the axes. At a solution (0, w2) the Hessian eigenvalues are
// 0 and 2 w2^2.
PotentialPtr make_product_valley();

// Max mixed absolute/relative mismatch between grad and central finite
// differences of value over `probes` random points in [-2, 2]^dim.
double check_gradient(const Potential& pot, std::size_t probes, std::uint64_t seed);

struct SdeConfig {
  PotentialPtr potential;
  double alpha = 2.0;
  double epsilon = 0.0;  // noise amplitude, the SDE's coefficient of dL
  double eta = 1e-3;     // step size
  std::size_t steps = 1;
  std::vector<double> w0;
  std::uint64_t seed = 0;
  // Record every thin-th step; 0 selects 1 for runs up to 1e5 steps and
  // ceil(steps / 1e5) beyond, so long runs stay bounded in memory.
  std::size_t thin = 0;
  // Per-substep displacement bound for the drift. A single Euler drift step
  // whose displacement stays within this bound is applied verbatim; larger
  // drifts (post-jump far states, where eta would be unstable) integrate
  // the descent flow in substeps instead. Never touches the noise term.
  double max_drift_step = 0.5;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::size_t thinning = 1;
};

// Discrete Levy motion: L_0 = 0, increments i.i.d. SaS(dt^(1/alpha)) per
// coordinate and per step, recorded on the grid 0, dt, ..., floor(horizon/dt)*dt.
Trajectory levy_path(double alpha, std::size_t dim, double horizon, double dt,
                     std::uint64_t seed);

// One step at a time iteration of
//   w_{k+1} = w_k - eta grad f(w_k) + epsilon eta^(1/alpha) S_k,
// S_k with i.i.d. SaS(1) coordinates. With epsilon = 0 no random number is
// ever consumed and the iteration is plain gradient descent.
class Stepper {
 public:
  Stepper(PotentialPtr potential, double alpha, double epsilon, double eta,
          std::span<const double> w0, std::uint64_t seed, double max_drift_step = 0.5);

  // Advances one step; throws BlowupError on a non-finite state.
  void step();

  const std::vector<double>& state() const { return w_; }
  std::size_t steps_taken() const { return steps_; }
  double time() const { return eta_ * static_cast<double>(steps_); }

 private:
  void drift();

  PotentialPtr potential_;
  stable::SasSampler sampler_;
  SplitMix64 rng_;
  std::vector<double> w_;
  std::vector<double> prev_;
  std::vector<double> grad_;
  double epsilon_;
  double eta_;
  double noise_scale_;  // epsilon * eta^(1/alpha)
  double max_drift_step_;
  std::size_t steps_ = 0;
};

// Runs the recursion for config.steps steps and records the (thinned)
// trajectory, always including the initial and final states.
Trajectory simulate(const SdeConfig& config);

struct FlatValleyConfig {
  std::vector<double> alpha_grid;
  double epsilon = 0.01;
  double eta = 0.01;
  std::size_t steps = 2000;
  std::size_t inits = 500;  // random initial points, uniform on [-2, 2]^2
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double max_drift_step = 0.5;
};

struct FlatValleyStats {
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct FlatValleyRow {
  double alpha = 0.0;
  std::size_t finished = 0;  // replicas that ran all steps with finite state
  std::size_t blowups = 0;   // replicas aborted on a non-finite state
  FlatValleyStats distance;  // |w| at the final iterate
  FlatValleyStats proxy;     // curvature proxy 2 max(w1^2, w2^2)
};

// Noisy descent on the (w1 w2)^2 valley from `inits` random starts per
// alpha. Records the distance from the origin and the curvature proxy at
// the final iterate; blown-up replicas are counted and excluded from the
// statistics. Replica (i, j) uses seed derive_seed(seed, i, j); output is
// thread-count independent.
std::vector<FlatValleyRow> flat_valley_experiment(const FlatValleyConfig& config);

}  // namespace levylab::sde

#endif  // LEVYLAB_SDE_HPP

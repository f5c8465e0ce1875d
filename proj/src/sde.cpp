#include "levylab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "levylab/errors.hpp"
#include "levylab/numerics.hpp"

namespace levylab::sde {

namespace {

class Quadratic final : public Potential {
 public:
  explicit Quadratic(std::size_t dim) : dim_(dim) {}
  double value(std::span<const double> w) const override {
    double s = 0.0;
    for (double x : w) s += x * x;
    return 0.5 * s;
  }
  void grad(std::span<const double> w, std::span<double> out) const override {
    std::copy(w.begin(), w.end(), out.begin());
  }
  std::size_t dim() const override { return dim_; }
  std::string name() const override { return "quadratic(" + std::to_string(dim_) + ")"; }

 private:
  std::size_t dim_;
};

// f' given by its roots (the critical points); f obtained by expanding the
// monomial coefficients once and integrating term by term, so value and
// grad agree exactly.
class Multiwell final : public Potential {
 public:
  Multiwell(std::vector<double> roots, std::string name)
      : roots_(std::move(roots)), name_(std::move(name)) {
    // Coefficients of f'(w) = prod (w - r): ascending powers.
    std::vector<double> c{1.0};
    for (double r : roots_) {
      std::vector<double> next(c.size() + 1, 0.0);
      for (std::size_t i = 0; i < c.size(); ++i) {
        next[i + 1] += c[i];
        next[i] -= r * c[i];
      }
      c = std::move(next);
    }
    deriv_coeffs_ = c;
    value_coeffs_.assign(c.size() + 1, 0.0);
    for (std::size_t i = 0; i < c.size(); ++i)
      value_coeffs_[i + 1] = c[i] / static_cast<double>(i + 1);
  }

  double value(std::span<const double> w) const override { return horner(value_coeffs_, w[0]); }
  void grad(std::span<const double> w, std::span<double> out) const override {
    out[0] = horner(deriv_coeffs_, w[0]);
  }
  std::size_t dim() const override { return 1; }
  std::string name() const override { return name_; }

 private:
  static double horner(const std::vector<double>& coeffs, double x) {
    double acc = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) acc = acc * x + coeffs[i];
    return acc;
  }

  std::vector<double> roots_;
  std::vector<double> deriv_coeffs_;  // ascending powers
  std::vector<double> value_coeffs_;
  std::string name_;
};

class ProductValley final : public Potential {
 public:
  double value(std::span<const double> w) const override {
    const double p = w[0] * w[1];
    return p * p;
  }
  void grad(std::span<const double> w, std::span<double> out) const override {
    out[0] = 2.0 * w[0] * w[1] * w[1];
    out[1] = 2.0 * w[0] * w[0] * w[1];
  }
  std::size_t dim() const override { return 2; }
  std::string name() const override { return "product-valley"; }
};

std::size_t auto_thin(std::size_t steps, std::size_t requested) {
  if (requested > 0) return requested;
  constexpr std::size_t kMaxRecords = 100'000;
  return steps <= kMaxRecords ? 1 : (steps + kMaxRecords - 1) / kMaxRecords;
}

bool all_finite(std::span<const double> w) {
  for (double x : w)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

PotentialPtr make_quadratic(std::size_t dim) {
  if (dim == 0) throw ParamError("quadratic potential needs dim >= 1");
  return std::make_shared<Quadratic>(dim);
}

PotentialPtr make_multiwell(std::span<const double> minima, std::span<const double> saddles) {
  if (minima.size() < 2 || saddles.size() + 1 != minima.size())
    throw ParamError("multiwell potential needs r >= 2 minima and r - 1 saddles");
  for (std::size_t i = 0; i + 1 < minima.size(); ++i) {
    if (!(minima[i] < saddles[i] && saddles[i] < minima[i + 1]))
      throw ParamError("multiwell potential requires strict interleaving m_i < s_i < m_{i+1}");
  }
  std::vector<double> roots(minima.begin(), minima.end());
  roots.insert(roots.end(), saddles.begin(), saddles.end());
  std::sort(roots.begin(), roots.end());
  return std::make_shared<Multiwell>(std::move(roots),
                                     "multiwell(" + std::to_string(minima.size()) + " wells)");
}

PotentialPtr make_double_well(double m1, double m2) {
  if (!(m1 < 0.0 && 0.0 < m2))
    throw ParamError("double well requires m1 < 0 < m2, got m1 = " + format_real(m1) +
                     ", m2 = " + format_real(m2));
  return std::make_shared<Multiwell>(std::vector<double>{m1, 0.0, m2},
                                     "double-well(" + format_real(m1) + "," + format_real(m2) +
                                         ")");
}

PotentialPtr make_product_valley() { return std::make_shared<ProductValley>(); }

double check_gradient(const Potential& pot, std::size_t probes, std::uint64_t seed) {
  SplitMix64 rng(seed);
  const std::size_t d = pot.dim();
  std::vector<double> w(d), g(d), wp(d), wm(d);
  double worst = 0.0;
  for (std::size_t p = 0; p < probes; ++p) {
    for (auto& x : w) x = rng.uniform(-2.0, 2.0);
    pot.grad(w, g);
    for (std::size_t i = 0; i < d; ++i) {
      const double h = 1e-5 * std::max(1.0, std::abs(w[i]));
      wp = w;
      wm = w;
      wp[i] += h;
      wm[i] -= h;
      const double fd = (pot.value(wp) - pot.value(wm)) / (2.0 * h);
      const double err = std::abs(fd - g[i]) / std::max(1.0, std::abs(g[i]));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

Trajectory levy_path(double alpha, std::size_t dim, double horizon, double dt,
                     std::uint64_t seed) {
  stable::validate_params(alpha, 1.0);
  if (dim == 0) throw ParamError("levy_path: dim must be >= 1");
  if (!(dt > 0.0)) throw ParamError("levy_path: dt must be positive");
  if (!(horizon >= dt)) throw ParamError("levy_path: horizon must be at least dt");
  const auto n_steps =
      static_cast<std::size_t>(std::floor(horizon / dt * (1.0 + 1e-12)));
  const double increment_scale = std::pow(dt, 1.0 / alpha);
  const std::size_t thin = auto_thin(n_steps, 0);

  const stable::SasSampler sampler(alpha);
  SplitMix64 rng(seed);
  Trajectory traj;
  traj.thinning = thin;
  std::vector<double> state(dim, 0.0);
  traj.times.push_back(0.0);
  traj.states.push_back(state);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    for (auto& x : state) x += increment_scale * sampler.draw(rng);
    if (k % thin == 0 || k == n_steps) {
      traj.times.push_back(static_cast<double>(k) * dt);
      traj.states.push_back(state);
    }
  }
  return traj;
}

Stepper::Stepper(PotentialPtr potential, double alpha, double epsilon, double eta,
                 std::span<const double> w0, std::uint64_t seed, double max_drift_step)
    : potential_(std::move(potential)),
      sampler_(alpha),
      rng_(seed),
      w_(w0.begin(), w0.end()),
      prev_(w_),
      grad_(w0.size()),
      epsilon_(epsilon),
      eta_(eta),
      noise_scale_(epsilon * std::pow(eta, 1.0 / alpha)),
      max_drift_step_(max_drift_step) {
  if (!potential_) throw ParamError("stepper: null potential");
  if (!(epsilon >= 0.0)) throw ParamError("stepper: epsilon must be >= 0");
  if (!(eta > 0.0)) throw ParamError("stepper: eta must be positive");
  if (!(max_drift_step > 0.0)) throw ParamError("stepper: max_drift_step must be positive");
  if (w_.size() != potential_->dim())
    throw ParamError("stepper: w0 dimension " + std::to_string(w_.size()) +
                     " does not match potential dimension " + std::to_string(potential_->dim()));
  if (!all_finite(w_)) throw ParamError("stepper: non-finite initial state");
}

void Stepper::drift() {
  potential_->grad(w_, grad_);
  double gmax = 0.0;
  for (double g : grad_) gmax = std::max(gmax, std::abs(g));
  if (eta_ * gmax <= max_drift_step_) {
    // Normal regime: the recursion's single Euler drift, verbatim.
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] -= eta_ * grad_[i];
    return;
  }
  // A jump has landed far out, where a full eta step of this gradient would
  // be numerically unstable. Integrate the descent flow over the same
  // duration eta in substeps whose displacement is bounded by the larger of
  // max_drift_step and 5% of the current state magnitude (the relative term
  // keeps the substep count logarithmic in the landing distance).
  double remaining = eta_;
  while (remaining > 0.0) {
    if (!std::isfinite(gmax))
      throw BlowupError("gradient overflow at step " + std::to_string(steps_ + 1), steps_ + 1,
                        prev_);
    double wmax = 0.0;
    for (double x : w_) wmax = std::max(wmax, std::abs(x));
    const double cap = std::max(max_drift_step_, 0.05 * wmax);
    const double dt = gmax > 0.0 ? std::min(remaining, cap / gmax) : remaining;
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] -= dt * grad_[i];
    remaining -= dt;
    if (remaining <= 0.0) break;
    if (!all_finite(w_)) return;  // step() raises the blow-up
    potential_->grad(w_, grad_);
    gmax = 0.0;
    for (double g : grad_) gmax = std::max(gmax, std::abs(g));
  }
}

void Stepper::step() {
  prev_ = w_;  // reuses capacity; kept for blow-up diagnostics
  drift();
  if (epsilon_ > 0.0) {
    for (auto& x : w_) x += noise_scale_ * sampler_.draw(rng_);
  }
  ++steps_;
  if (!all_finite(w_))
    throw BlowupError("non-finite state at step " + std::to_string(steps_), steps_, prev_);
}

Trajectory simulate(const SdeConfig& config) {
  stable::validate_params(config.alpha, 1.0);
  if (!config.potential) throw ParamError("simulate: missing potential");
  if (config.steps < 1) throw ParamError("simulate: steps must be >= 1");
  const std::size_t thin = auto_thin(config.steps, config.thin);

  Stepper stepper(config.potential, config.alpha, config.epsilon, config.eta, config.w0,
                  config.seed, config.max_drift_step);
  Trajectory traj;
  traj.thinning = thin;
  traj.times.push_back(0.0);
  traj.states.push_back(stepper.state());
  for (std::size_t k = 1; k <= config.steps; ++k) {
    stepper.step();
    if (k % thin == 0 || k == config.steps) {
      traj.times.push_back(stepper.time());
      traj.states.push_back(stepper.state());
    }
  }
  return traj;
}

std::vector<FlatValleyRow> flat_valley_experiment(const FlatValleyConfig& config) {
  if (config.alpha_grid.empty()) throw ParamError("flat_valley: empty alpha grid");
  for (double a : config.alpha_grid) stable::validate_params(a, 1.0);
  if (config.inits < 1) throw ParamError("flat_valley: inits must be >= 1");
  if (config.steps < 1) throw ParamError("flat_valley: steps must be >= 1");

  const PotentialPtr valley = make_product_valley();
  const std::size_t n_alpha = config.alpha_grid.size();

  struct Outcome {
    double distance = 0.0;
    double proxy = 0.0;
    bool blew_up = false;
  };
  std::vector<Outcome> outcomes(n_alpha * config.inits);

  parallel_for(n_alpha * config.inits, config.threads, [&](std::size_t cell) {
    const std::size_t ai = cell / config.inits;
    const std::size_t rep = cell % config.inits;
    const std::uint64_t replica_seed = derive_seed(config.seed, ai, rep);
    SplitMix64 init_rng(derive_seed(replica_seed, 0xfeed));
    const double w0[2] = {init_rng.uniform(-2.0, 2.0), init_rng.uniform(-2.0, 2.0)};
    try {
      Stepper stepper(valley, config.alpha_grid[ai], config.epsilon, config.eta, w0,
                      replica_seed, config.max_drift_step);
      for (std::size_t k = 0; k < config.steps; ++k) stepper.step();
      const auto& w = stepper.state();
      outcomes[cell].distance = std::hypot(w[0], w[1]);
      outcomes[cell].proxy = 2.0 * std::max(w[0] * w[0], w[1] * w[1]);
    } catch (const BlowupError&) {
      outcomes[cell].blew_up = true;
    }
  });

  std::vector<FlatValleyRow> rows(n_alpha);
  for (std::size_t ai = 0; ai < n_alpha; ++ai) {
    FlatValleyRow& row = rows[ai];
    row.alpha = config.alpha_grid[ai];
    std::vector<double> dist, proxy;
    for (std::size_t rep = 0; rep < config.inits; ++rep) {
      const Outcome& o = outcomes[ai * config.inits + rep];
      if (o.blew_up) {
        ++row.blowups;
      } else {
        dist.push_back(o.distance);
        proxy.push_back(o.proxy);
      }
    }
    row.finished = dist.size();
    auto summarize = [](std::span<const double> xs) {
      FlatValleyStats s;
      if (!xs.empty()) {
        s.mean = mean(xs);
        s.median = median(xs);
        s.q1 = quantile(xs, 0.25);
        s.q3 = quantile(xs, 0.75);
      }
      return s;
    };
    row.distance = summarize(dist);
    row.proxy = summarize(proxy);
  }
  return rows;
}

}  // namespace levylab::sde

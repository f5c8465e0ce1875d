#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "levylab/errors.hpp"
#include "levylab/numerics.hpp"
#include "levylab/sde.hpp"
#include "oracles.hpp"

using namespace levylab;
using namespace levylab::sde;

TEST_CASE("every shipped potential passes the finite-difference check") {
  const PotentialPtr pots[] = {
      make_quadratic(1),
      make_quadratic(3),
      make_double_well(-1.0, 2.0),
      make_double_well(-0.5, 1.0),
      make_multiwell(std::vector<double>{-2.0, 0.5, 3.0}, std::vector<double>{-0.5, 1.5}),
      make_product_valley(),
  };
  for (const auto& p : pots) {
    INFO(p->name());
    CHECK(check_gradient(*p, 100, 4711) <= 1e-5);
  }
}

TEST_CASE("double well has the advertised critical structure") {
  const auto pot = make_double_well(-1.0, 2.0);
  CHECK(pot->value(std::vector<double>{0.0}) == 0.0);
  auto deriv = [&](double w) {
    double g;
    const double x[] = {w};
    pot->grad(x, {&g, 1});
    return g;
  };
  CHECK(deriv(-1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(deriv(0.0) == 0.0);
  CHECK(deriv(2.0) == doctest::Approx(0.0).epsilon(1e-14));

  // f''(m1) = m1 (m1 - m2), f''(m2) = m2 (m2 - m1), via central differences.
  auto second = [&](double w) { return (deriv(w + 1e-6) - deriv(w - 1e-6)) / 2e-6; };
  CHECK(second(-1.0) == doctest::Approx(3.0).epsilon(1e-5));
  CHECK(second(2.0) == doctest::Approx(6.0).epsilon(1e-5));
  CHECK(second(0.0) == doctest::Approx(-2.0).epsilon(1e-5));  // m1 * m2

  CHECK_THROWS_AS(make_double_well(1.0, 2.0), ParamError);
  CHECK_THROWS_AS(make_double_well(-1.0, -0.5), ParamError);
}

TEST_CASE("symmetric double well has equal depths") {
  const auto pot = make_double_well(-1.0, 1.0);
  CHECK(pot->value(std::vector<double>{-1.0}) ==
        doctest::Approx(pot->value(std::vector<double>{1.0})).epsilon(1e-14));
}

TEST_CASE("product valley: values, gradients and curvature proxy") {
  const auto pot = make_product_valley();
  CHECK(pot->value(std::vector<double>{1.0, 1.0}) == 1.0);
  double g[2];
  pot->grad(std::vector<double>{1.0, 1.0}, g);
  CHECK(g[0] == 2.0);
  CHECK(g[1] == 2.0);

  for (double t : {-2.0, 0.0, 3.0}) {
    CHECK(pot->value(std::vector<double>{0.0, t}) == 0.0);
    CHECK(pot->value(std::vector<double>{t, 0.0}) == 0.0);
    pot->grad(std::vector<double>{0.0, t}, g);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
  }

  // Hessian eigenvalue proxy at (0, 3): 2 * w2^2 = 18.
  const double w[] = {0.0, 3.0};
  CHECK(2.0 * std::max(w[0] * w[0], w[1] * w[1]) == 18.0);
}

TEST_CASE("levy_path starts at zero and has the advertised increment law") {
  const auto traj = levy_path(2.0, 1, 100.0, 0.01, 60);
  REQUIRE(traj.times[0] == 0.0);
  REQUIRE(traj.states[0][0] == 0.0);
  CHECK(traj.thinning == 1);
  REQUIRE(traj.times.size() == 10001);

  // alpha = 2: increments over dt are N(0, 2 dt).
  std::vector<double> incs(traj.states.size() - 1);
  for (std::size_t i = 1; i < traj.states.size(); ++i)
    incs[i - 1] = traj.states[i][0] - traj.states[i - 1][0];
  CHECK(variance(incs) == doctest::Approx(2.0 * 0.01).epsilon(0.05));

  // Times strictly increasing, states aligned.
  for (std::size_t i = 1; i < traj.times.size(); ++i) CHECK(traj.times[i] > traj.times[i - 1]);

  CHECK_THROWS_AS(levy_path(0.0, 1, 1.0, 0.01, 0), ParamError);
  CHECK_THROWS_AS(levy_path(1.0, 0, 1.0, 0.01, 0), ParamError);
  CHECK_THROWS_AS(levy_path(1.0, 1, 0.005, 0.01, 0), ParamError);
}

TEST_CASE("levy_path at alpha=1: L_t is Cauchy with scale t") {
  const double t = 0.5;
  std::vector<double> endpoints;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const auto traj = levy_path(1.0, 1, t, 0.01, seed);
    endpoints.push_back(traj.states.back()[0]);
  }
  CHECK(quantile(endpoints, 0.25) == doctest::Approx(-t).epsilon(0.1));
  CHECK(quantile(endpoints, 0.75) == doctest::Approx(t).epsilon(0.1));
}

TEST_CASE("epsilon=0 reduces to plain gradient descent, bitwise") {
  SdeConfig cfg;
  cfg.potential = make_double_well(-1.0, 2.0);
  cfg.alpha = 1.5;
  cfg.epsilon = 0.0;
  cfg.eta = 0.01;
  cfg.steps = 500;
  cfg.w0 = {0.5};
  cfg.seed = 123;
  cfg.thin = 1;
  const auto traj = simulate(cfg);

  double w = 0.5, g = 0.0;
  for (std::size_t k = 1; k <= cfg.steps; ++k) {
    cfg.potential->grad({&w, 1}, {&g, 1});
    w -= cfg.eta * g;
    REQUIRE(traj.states[k][0] == w);
  }
}

TEST_CASE("quadratic descent contracts geometrically") {
  SdeConfig cfg;
  cfg.potential = make_quadratic(1);
  cfg.alpha = 2.0;
  cfg.epsilon = 0.0;
  cfg.eta = 0.1;
  cfg.steps = 200;
  cfg.w0 = {1.0};
  cfg.thin = 1;
  const auto traj = simulate(cfg);
  double expect = 1.0;
  for (std::size_t k = 0; k <= 200; ++k) {
    CHECK(traj.states[k][0] == doctest::Approx(expect).epsilon(1e-12));
    expect *= 0.9;
  }
}

TEST_CASE("identical configs give identical trajectories") {
  SdeConfig cfg;
  cfg.potential = make_double_well(-1.0, 2.0);
  cfg.alpha = 1.3;
  cfg.epsilon = 0.2;
  cfg.eta = 1e-3;
  cfg.steps = 20000;
  cfg.w0 = {-1.0};
  cfg.seed = 777;
  const auto a = simulate(cfg);
  const auto b = simulate(cfg);
  CHECK(a.times == b.times);
  CHECK(a.states == b.states);
}

TEST_CASE("noise increments scale linearly in epsilon for a fixed seed") {
  SdeConfig cfg;
  cfg.potential = make_quadratic(1);
  cfg.alpha = 1.4;
  cfg.eta = 0.01;
  cfg.steps = 200;
  cfg.w0 = {1.0};
  cfg.seed = 31;
  cfg.thin = 1;

  cfg.epsilon = 1.0;
  const auto unit = simulate(cfg);
  cfg.epsilon = 0.3;
  const auto scaled = simulate(cfg);

  // Reconstruct each step's noise: w_{k+1} - w_k + eta * grad(w_k).
  for (std::size_t k = 0; k + 1 < unit.states.size(); ++k) {
    const double nu = unit.states[k + 1][0] - (1.0 - cfg.eta) * unit.states[k][0];
    const double ns = scaled.states[k + 1][0] - (1.0 - cfg.eta) * scaled.states[k][0];
    CHECK(ns == doctest::Approx(0.3 * nu).epsilon(1e-12));
  }
}

TEST_CASE("Ornstein-Uhlenbeck stationary variance at alpha=2") {
  SdeConfig cfg;
  cfg.potential = make_quadratic(1);
  cfg.alpha = 2.0;
  cfg.epsilon = 0.5;
  cfg.eta = 1e-3;
  cfg.steps = 10000000;
  cfg.w0 = {0.0};
  cfg.seed = 2025;
  const auto traj = simulate(cfg);  // auto-thinned to 1e5 records
  CHECK(traj.thinning == 100);

  std::vector<double> tail;
  for (std::size_t i = 10000; i < traj.states.size(); ++i) tail.push_back(traj.states[i][0]);
  // dw = -w dt + sqrt(2) eps dB has stationary variance eps^2.
  CHECK(variance(tail) == doctest::Approx(0.25).epsilon(0.05));
}

TEST_CASE("benchmark seed: the double well is metastable, both wells visited") {
  SdeConfig cfg;
  cfg.potential = make_double_well(-1.0, 2.0);
  cfg.alpha = 1.2;
  cfg.epsilon = 0.1;
  cfg.eta = 1e-3;
  cfg.steps = 1000000;
  cfg.w0 = {-1.0};
  cfg.seed = 19;
  const auto traj = simulate(cfg);
  double lo = 1e300, hi = -1e300;
  for (const auto& s : traj.states) {
    lo = std::min(lo, s[0]);
    hi = std::max(hi, s[0]);
  }
  CHECK(lo < -0.9);  // near m1
  CHECK(hi > 1.9);   // near m2
}

TEST_CASE("non-finite states abort with diagnostics") {
  SdeConfig cfg;
  cfg.potential = make_double_well(-1.0, 2.0);
  cfg.alpha = 2.0;
  cfg.epsilon = 0.0;
  cfg.eta = 1e-3;
  cfg.steps = 1000;
  cfg.w0 = {100.0};          // eta * grad ~ 1e3: naked Euler oscillates to overflow
  cfg.max_drift_step = 1e300;  // disable the far-regime substepping
  try {
    simulate(cfg);
    FAIL("expected BlowupError");
  } catch (const BlowupError& e) {
    CHECK(e.step >= 1);
    REQUIRE(e.last_finite_state.size() == 1);
    CHECK(std::isfinite(e.last_finite_state[0]));
  }
}

TEST_CASE("drift substepping keeps far landings integrable") {
  // Same overshoot scenario, default cap: the descent flow is integrated in
  // substeps and the state relaxes into a well instead of exploding.
  SdeConfig cfg;
  cfg.potential = make_double_well(-1.0, 2.0);
  cfg.alpha = 2.0;
  cfg.epsilon = 0.0;
  cfg.eta = 1e-3;
  cfg.steps = 3000;
  cfg.w0 = {1e5};
  const auto traj = simulate(cfg);
  CHECK(traj.states.back()[0] == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("trajectory thinning keeps endpoints and monotone times") {
  SdeConfig cfg;
  cfg.potential = make_quadratic(1);
  cfg.alpha = 1.5;
  cfg.epsilon = 0.1;
  cfg.eta = 0.01;
  cfg.steps = 1003;
  cfg.w0 = {1.0};
  cfg.thin = 10;
  const auto traj = simulate(cfg);
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == doctest::Approx(1003 * 0.01));
  for (std::size_t i = 1; i < traj.times.size(); ++i) CHECK(traj.times[i] > traj.times[i - 1]);
}

TEST_CASE("flat valley: plain descent reaches the zero-loss manifold") {
  SdeConfig cfg;
  cfg.potential = make_product_valley();
  cfg.alpha = 2.0;
  cfg.epsilon = 0.0;
  cfg.eta = 0.1;
  cfg.steps = 5000000;
  cfg.w0 = {1.0, 1.0};
  cfg.thin = 1000000;
  const auto traj = simulate(cfg);
  const auto& w = traj.states.back();
  CHECK(std::abs(w[0] * w[1]) < 1e-6);
}

TEST_CASE("flat valley: the diagonal is invariant under plain descent") {
  SdeConfig cfg;
  cfg.potential = make_product_valley();
  cfg.alpha = 2.0;
  cfg.epsilon = 0.0;
  cfg.eta = 0.05;
  cfg.steps = 1000;
  cfg.w0 = {1.3, 1.3};
  cfg.thin = 1;
  const auto traj = simulate(cfg);
  for (const auto& s : traj.states) REQUIRE(s[0] == s[1]);
}

TEST_CASE("flat_valley_experiment is deterministic and schedule-independent") {
  FlatValleyConfig cfg;
  cfg.alpha_grid = {1.0, 2.0};
  cfg.epsilon = 0.01;
  cfg.eta = 0.01;
  cfg.steps = 300;
  cfg.inits = 40;
  cfg.seed = 99;

  const auto a = flat_valley_experiment(cfg);
  cfg.threads = 4;
  const auto b = flat_valley_experiment(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].finished == b[i].finished);
    CHECK(a[i].blowups == b[i].blowups);
    CHECK(a[i].distance.mean == b[i].distance.mean);
    CHECK(a[i].proxy.median == b[i].proxy.median);
    CHECK(a[i].finished + a[i].blowups == cfg.inits);
  }
}

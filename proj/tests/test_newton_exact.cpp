#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tdks/diagnostics.hpp"
#include "tdks/errors.hpp"
#include "tdks/newton_exact.hpp"

using namespace tdks;

namespace {

struct Setup {
  Grid g{1, 96, 10.0};
  PotentialModel m = testing::hartree_model(g, 1.25, "harmonic", XCParams{0.2, 0.5});
  OrbitalSet psi0 = testing::two_orbitals(g);
  FixedPointMap map{m, Propagator::for_model(m), psi0, uniform_knots(0.0, 0.3, 15)};
};

PicardResult picard(const FixedPointMap& map, double target) {
  PicardOptions o;
  o.target_residual = target;
  return picard_solve(map, o);
}

}  // namespace

TEST_CASE("K' agrees with central differences of K") {
  Setup s;
  Rng rng(3);
  const auto base = random_trajectory(s.g, 2, s.map.times(), rng, 1.0);
  const auto w = random_trajectory(s.g, 2, s.map.times(), rng, 1.0);
  CHECK(central_fd_error(s.map, base, w, 1e-5) < 1e-6);
  CHECK(sup_norm(kprime_apply(s.map, base, w) - Linearization(s.map, base).apply(w)) == 0.0);
}

TEST_CASE("K' is linear and vanishes for a decoupled model") {
  Setup s;
  Rng rng(4);
  const auto base = random_trajectory(s.g, 2, s.map.times(), rng, 1.0);
  const auto a = random_trajectory(s.g, 2, s.map.times(), rng, 1.0);
  const auto b = random_trajectory(s.g, 2, s.map.times(), rng, 1.0);
  const Linearization lin(s.map, base);
  CHECK(sup_norm(lin.apply(a + 3.0 * b) - lin.apply(a) - 3.0 * lin.apply(b)) < 1e-12 * sup_norm(lin.apply(a)) + 1e-14);
  CHECK(sup_norm(lin.image() - s.map(base)) == 0.0);

  HartreeParams off;
  off.enabled = false;
  const PotentialModel free(s.g, ExternalPotential{}, off, std::nullopt);
  const FixedPointMap fm(free, Propagator::for_model(free), s.psi0, s.map.times());
  CHECK(sup_norm(kprime_apply(fm, base, a)) == 0.0);
}

TEST_CASE("linearized sweep solves (I - K') psi = f") {
  Setup s;
  Rng rng(5);
  const auto base = random_trajectory(s.g, 2, s.map.times(), rng, 1.0);
  const auto f = random_trajectory(s.g, 2, s.map.times(), rng, 1.0);
  const Linearization lin(s.map, base);
  const auto sol = solve_linearized(lin, f, 1e-14);
  CHECK(sol.iterations > 1);
  CHECK(sol.rate < 1.0);
  CHECK(sup_norm(sol.solution - lin.apply(sol.solution) - f) < 1e-12);
  CHECK_THROWS_AS(solve_linearized(lin, f, 1e-14, 500, 1.5), window_too_long);
}

TEST_CASE("newton_constants follows the kappa / sigma formulas") {
  const auto ks = newton_constants(2.0, 0.5, 0.1, 0.5, 3.0);
  CHECK(ks.kappa == doctest::Approx(6.0));
  CHECK(ks.sigma == doctest::Approx(2.0 * 36.0 / 0.5 * 0.5 / (0.9 * 0.5)));
  const auto ks2 = newton_constants(2.0, 0.9, 0.5, 0.5, 1.0);
  CHECK(ks2.sigma == doctest::Approx(2.0 * 100.0 / 0.5));
  CHECK_THROWS_AS(newton_constants(1.0, 1.0, 0.5, 0.5, 1.0), configuration_error);
  CHECK_THROWS_AS(newton_constants(1.0, 0.5, 0.5, 0.6, 1.0), configuration_error);
  CHECK_THROWS_AS(newton_constants(1.0, 0.5, 0.5, 0.5, 0.0), configuration_error);
}

TEST_CASE("error bound decays doubly exponentially") {
  CHECK(newton_error_bound(1.0, 0.0, 0.5, 3) == 0.0);
  const double b1 = newton_error_bound(2.0, 4.0, 0.3, 1);
  const double b2 = newton_error_bound(2.0, 4.0, 0.3, 2);
  const double base = 1.0 - std::sqrt(0.4);
  CHECK(b1 == doctest::Approx(2.0 / 1.2 * base * base / 2.0));
  CHECK(b2 == doctest::Approx(2.0 / 1.2 * std::pow(base, 4) / 4.0));
}

TEST_CASE("Newton converges quadratically to the Picard fixed point") {
  Setup s;
  const auto seed = picard(s.map, 1e-2);
  const auto ref = picard(s.map, 1e-13);
  NewtonParams p;
  p.enforce_preconditions = false;
  const auto res = newton_solve(s.map, seed.solution, p);
  CHECK(res.trace.converged);
  const auto r = res.trace.residuals();
  CHECK(r.size() <= 6);
  for (std::size_t k = 1; k + 1 < r.size(); ++k)
    if (r[k + 1] > p.residual_floor()) CHECK(r[k + 1] / (r[k] * r[k]) < 10.0 * r[1] / (r[0] * r[0]));
  CHECK(sup_norm(res.solution - ref.solution) < 1e-11);
  CHECK(res.inner_iterations > 0);
}

TEST_CASE("Newton refuses a start outside the admissible residual") {
  Setup s;
  NewtonParams p;
  p.sigma = 1e6;
  CHECK_THROWS_AS(newton_solve(s.map, s.map.zero_charge(), p), consistency_error);
  p.sigma = 1.0;
  p.q = 0.5;
  p.delta = 1e-8;
  CHECK_THROWS_AS(newton_solve(s.map, s.map.zero_charge(), p), consistency_error);
}

TEST_CASE("sampled derivative constants are consistent") {
  Setup s;
  Rng rng(9);
  const Linearization lin(s.map, s.map.zero_charge());
  const double k0 = estimate_kprime_norm(lin, 3, rng);
  CHECK(k0 > 0.0);
  CHECK(k0 < 1.0);
  const double inv = estimate_inverse_norm(lin, 2, rng, 1e-13);
  CHECK(inv >= 1.0);
  CHECK(inv <= 1.0 / (1.0 - k0) * 1.05);
  CHECK(estimate_derivative_lipschitz(s.map, 1.0, 3, rng) > 0.0);
}

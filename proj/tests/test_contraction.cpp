#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tdks/contraction.hpp"
#include "tdks/errors.hpp"

using namespace tdks;

namespace {

struct Certified {
  Grid g{1, 128, 10.0};
  PotentialModel m = testing::hartree_model(g, 0.1, "zero");
  OrbitalSet psi0 = testing::two_orbitals(g);
  FixedPointMap map{m, Propagator::for_model(m), psi0, uniform_knots(0.0, 0.05, 20)};
};

}  // namespace

TEST_CASE("lemma constant is the documented combination of kernel norms") {
  const Grid g(1, 64, 8.0);
  const auto m = testing::hartree_model(g, 1.0);
  const EmbeddingConstants e{2.0, 1.5, 1.7};
  const auto& k = m.hartree_kernel();
  const double expect = 8.0 * k.gradient_l1_norm() + 1.7 * 1.7 * k.l2_norm() + 1.5 * 1.5 * 4.0 * k.l1_norm();
  CHECK(lemma_constant(k, e) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("embedding constants dominate sampled Sobolev ratios") {
  const Grid g(1, 96, 6.0);
  const auto e = embedding_constants(g, 11, 400);
  Rng rng(12);
  for (int k = 0; k < 200; ++k) {
    const Field f = random_rough_field(g, rng);
    CHECK(sobolev_ratio(g, f, 6.0) <= e.E1);
    CHECK(sobolev_ratio(g, f, 3.0) <= e.E2);
    CHECK(sobolev_ratio(g, f, 4.0) <= e.E3);
  }
}

TEST_CASE("certified constants: gamma bounds the measured contraction") {
  Certified c;
  const auto e = embedding_constants(c.g);
  const auto b = analytic_constants(c.map, e);
  REQUIRE(b.gamma_t < 1.0);
  CHECK(b.U_bound >= 1.0);
  CHECK(b.r >= 2.0 * norm(c.psi0, NormKind::H10));
  CHECK(contraction_constant(b.window_length, b) == doctest::Approx(b.gamma_t));
  Rng rng(7);
  const double measured = measure_contraction(c.map, b.r, 20, rng);
  CHECK(measured > 0.0);
  CHECK(measured <= b.gamma_t);
  Rng rng2(8);
  CHECK(measure_propagator_norm(c.map, b.r, 10, rng2) <= b.U_bound);
}

TEST_CASE("Picard iterates contract at most at rate gamma and meet the a-priori bound") {
  Certified c;
  const auto b = analytic_constants(c.map, embedding_constants(c.g));
  PicardOptions opts;
  opts.target_residual = 1e-12;
  opts.q = b.gamma_t;
  opts.keep_iterates = true;
  const auto res = picard_solve(c.map, opts);
  REQUIRE(res.trace.converged);
  const auto r = res.trace.residuals();
  for (std::size_t k = 1; k < r.size(); ++k)
    if (r[k - 1] > 1e-14) CHECK(r[k] <= b.gamma_t * r[k - 1]);
  CHECK(static_cast<int>(r.size()) <= res.predicted_iterations);
  // ||Psi_k - Psi|| <= gamma^k / (1 - gamma) ||Psi_1 - Psi_0||.
  const double d0 = sup_norm(res.iterates[1] - res.iterates[0]);
  for (std::size_t k = 0; k < res.iterates.size(); ++k) {
    const double err = sup_norm(res.iterates[k] - res.solution);
    CHECK(err <= std::pow(b.gamma_t, k) / (1.0 - b.gamma_t) * d0 + 1e-13);
  }
}

TEST_CASE("decoupled model: Picard stops after one evaluation and gamma vanishes") {
  const Grid g(1, 64, 8.0);
  HartreeParams off;
  off.enabled = false;
  ExternalPotential v;
  v.family = "harmonic";
  const PotentialModel m(g, v, off, std::nullopt);
  const FixedPointMap map(m, Propagator::for_model(m), testing::two_orbitals(g), uniform_knots(0.0, 0.5, 25));
  const auto b = analytic_constants(map, embedding_constants(g, kDefaultSeed, 200));
  CHECK(b.C0 == 0.0);
  CHECK(b.gamma_t == 0.0);
  const auto res = picard_solve(map, {});
  CHECK(res.trace.records.size() == 1);
  CHECK(res.trace.records[0].residual == 0.0);
}

TEST_CASE("window_count picks the smallest admissible divisor") {
  CHECK(window_count(0.3, 0.5, 30) == 1);
  CHECK(window_count(1.2, 0.5, 30) == 3);
  CHECK(window_count(1.6, 0.5, 30) == 5);
  CHECK(window_count(0.1, 0.5, 30, 2) == 2);
  CHECK_THROWS_AS(window_count(10.0, 0.5, 7), window_too_long);
  CHECK_THROWS_AS(window_count(0.1, 1.0, 7), configuration_error);
}

TEST_CASE("continuation over two windows reproduces the single-window solution") {
  const Grid g(1, 96, 8.0);
  const auto m = testing::hartree_model(g, 0.5, "harmonic", XCParams{0.2, 0.5});
  const auto psi0 = testing::two_orbitals(g);
  const auto prop = Propagator::for_model(m);
  const WindowSolver solver = [](const FixedPointMap& map) {
    PicardOptions o;
    o.target_residual = 1e-13;
    auto r = picard_solve(map, o);
    return std::make_pair(r.solution, r.trace);
  };
  const auto one = continue_in_time(psi0, m, prop, 0.0, 0.4, 20, 1, solver);
  const auto two = continue_in_time(psi0, m, prop, 0.0, 0.4, 20, 2, solver);
  CHECK(two.windows == 2);
  CHECK(two.traces.size() == 2);
  REQUIRE(two.solution.knots() == 21);
  CHECK(sup_norm(one.solution - two.solution) < 1e-10);
  CHECK_THROWS_AS(continue_in_time(psi0, m, prop, 0.0, 0.4, 20, 3, solver), configuration_error);
}

TEST_CASE("long windows at strong coupling are refused by the analytic bounds") {
  const Grid g(1, 128, 10.0);
  const auto m = testing::hartree_model(g, 3.0);
  const FixedPointMap map(m, Propagator::for_model(m), testing::two_orbitals(g), uniform_knots(0.0, 2.0, 100));
  const auto e = embedding_constants(g, kDefaultSeed, 200);
  bool refused = false;
  try {
    const auto b = analytic_constants(map, e);
    refused = b.gamma_t >= 1.0;
  } catch (const window_too_long&) {
    refused = true;
  }
  CHECK(refused);
}

TEST_CASE("solution radius is finite and nonnegative") {
  Certified c;
  const auto in = solution_radius(c.psi0, c.m, 0.05);
  CHECK(in.energy0 > 0.0);
  CHECK(in.r0 >= 0.0);
  CHECK(std::isfinite(in.r0));
  const auto [r0, r] = ball_radius(c.psi0, c.m, 0.05, 1.5);
  CHECK(r == doctest::Approx(2.0 * 1.5 * std::max(norm(c.psi0, NormKind::H10), r0)));
}

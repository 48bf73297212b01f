#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tdks/diagnostics.hpp"
#include "tdks/errors.hpp"

using namespace tdks;

namespace {

Trajectory self_consistent(const FixedPointMap& map) {
  PicardOptions o;
  o.target_residual = 1e-13;
  return picard_solve(map, o).solution;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("convergence order of synthetic sequences") {
  std::vector<double> quad{1e-1, 1e-2, 1e-4, 1e-8};
  auto fit = convergence_order(quad);
  CHECK(fit.order == doctest::Approx(2.0));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  CHECK(fit.points == 4);
  std::vector<double> lin{1.0, 0.5, 0.25, 0.125, 0.0625};
  CHECK(convergence_order(lin).order == doctest::Approx(1.0));
  // Points at or below the floor are excluded.
  std::vector<double> floored{1e-1, 1e-2, 1e-4, 1e-8, 1e-13, 1e-13};
  CHECK(convergence_order(floored, 1e-12).points == 4);
  CHECK_THROWS_AS(convergence_order({1e-1, 1e-2}), diagnostic_error);
  CHECK_THROWS_AS(convergence_order(floored, 1e-3), diagnostic_error);
}

TEST_CASE("energy identity holds for a static decoupled problem to rounding") {
  const Grid g(1, 128, 10.0);
  HartreeParams off;
  off.enabled = false;
  ExternalPotential v;
  v.family = "harmonic";
  const PotentialModel m(g, v, off, std::nullopt);
  const FixedPointMap map(m, Propagator::for_model(m), testing::two_orbitals(g), uniform_knots(0.0, 0.5, 25));
  const auto sol = map.zero_charge();
  CHECK(max_abs(energy_identity_residual(sol, m)) < 1e-12);
}

TEST_CASE("energy identity residual refines at second order with drive and history") {
  const Grid g(1, 128, 10.0);
  ExternalPotential v;
  v.family = "harmonic";
  v.drive_amplitude = 0.3;
  v.drive_frequency = 2.0;
  HartreeParams hp;
  hp.radius = 0.5;
  const PotentialModel m(g, v, hp, XCParams{0.2, 0.5});
  const auto psi0 = testing::two_orbitals(g);
  auto residual = [&](int steps) {
    const FixedPointMap map(m, Propagator::for_model(m), psi0, uniform_knots(0.0, 0.4, steps));
    return max_abs(energy_identity_residual(self_consistent(map), m));
  };
  const double ratio = residual(20) / residual(40);
  CHECK(ratio == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("Duhamel identity: exact for equal densities, second order otherwise") {
  const Grid g(1, 128, 10.0);
  const auto m = testing::hartree_model(g, 1.0, "harmonic", XCParams{0.2, 0.5});
  const auto psi0 = testing::two_orbitals(g);
  const auto prop = Propagator::for_model(m);
  auto residual = [&](int steps, bool same) {
    const auto times = uniform_knots(0.0, 0.4, steps);
    Rng rng(21);
    const auto a = random_trajectory(g, 2, times, rng, 1.0);
    const auto b = random_trajectory(g, 2, times, rng, 1.0);
    const auto pa = DensityPath::from_trajectory(a);
    return duhamel_identity_residual(psi0, pa, same ? pa : DensityPath::from_trajectory(b), m, prop);
  };
  CHECK(residual(20, true) < 1e-13);
  CHECK(residual(20, false) / residual(40, false) == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("finite differences against K' and a dense Jacobian on a tiny grid") {
  const Grid g(1, 16, 4.0);
  const auto m = testing::hartree_model(g, 1.0, "harmonic", XCParams{0.2, 0.5});
  Eigen::MatrixXcd v(g.size(), 1);
  for (Eigen::Index p = 0; p < g.size(); ++p) v(p, 0) = std::exp(-std::pow(g.coordinate(p) - 2.0, 2));
  const OrbitalSet psi0(g, v);
  const FixedPointMap map(m, Propagator::for_model(m), psi0, uniform_knots(0.0, 0.1, 4));
  const auto base = self_consistent(map);
  const auto jac = dense_jacobian_check(map, base);
  CHECK(jac.dofs == 2 * 16 * 5);
  CHECK(jac.relative_frobenius < 1e-3);

  Rng rng(8);
  const auto w = random_trajectory(g, 1, map.times(), rng, 1.0);
  const auto table = gateaux_fd_check(map, base, w, {1e-2, 5e-3, 2.5e-3});
  CHECK(table.central_slope == doctest::Approx(2.0).epsilon(0.15));
  CHECK(table.one_sided_slope == doctest::Approx(1.0).epsilon(0.15));
  CHECK(sup_norm(map_difference(map, base, w) - (map(base) - map(w))) < 1e-12);
}

TEST_CASE("audit inequalities hold on random samples") {
  const Grid g(1, 96, 8.0);
  const auto m = testing::hartree_model(g, 1.0);
  Rng rng(31);
  const EmbeddingConstants e = embedding_constants(g, 4, 400);
  for (int k = 0; k < 20; ++k) {
    const Field f = random_smooth_field(g, rng);
    const Field h = random_rough_field(g, rng);
    const auto psi = random_state(g, 2, rng);
    CHECK(hartree_product_bound_check(f, h, psi, m, e).pass);
    const auto a = random_state(g, 2, rng);
    const auto b = random_state(g, 2, rng, false);
    const auto c = hartree_lipschitz_check(a, b, psi, m, e);
    CHECK(c.pass);
    CHECK(c.margin() >= 0.0);
  }
}

TEST_CASE("zero-force value vanishes without exchange-correlation") {
  const Grid g(1, 64, 8.0);
  const auto m = testing::hartree_model(g, 1.0);
  const FixedPointMap map(m, Propagator::for_model(m), testing::two_orbitals(g), uniform_knots(0.0, 0.2, 8));
  CHECK(zero_force_value(map.zero_charge(), m) == 0.0);
  const auto mx = testing::hartree_model(g, 1.0, "harmonic", XCParams{0.3, 0.5});
  const FixedPointMap mapx(mx, Propagator::for_model(mx), testing::two_orbitals(g), uniform_knots(0.0, 0.2, 8));
  CHECK(std::isfinite(zero_force_value(mapx.zero_charge(), mx)));
}

TEST_CASE("energy of a ground state matches the oscillator value") {
  const Grid g(1, 400, 16.0);
  ExternalPotential v;
  v.family = "harmonic";
  HartreeParams off;
  off.enabled = false;
  const PotentialModel m(g, v, off, std::nullopt);
  Eigen::MatrixXcd psi(g.size(), 1);
  for (Eigen::Index p = 0; p < g.size(); ++p) psi(p, 0) = std::exp(-std::pow(g.coordinate(p) - 8.0, 2) / 2.0);
  OrbitalSet s(g, psi);
  s *= 1.0 / norm(s, NormKind::L2);
  const auto e = energy(s, 0.0, Field::Zero(g.size()), m);
  CHECK(e.physical == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(e.script == doctest::Approx(0.25).epsilon(1e-3));
}

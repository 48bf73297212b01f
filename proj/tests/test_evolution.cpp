#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tdks/errors.hpp"
#include "tdks/random_fields.hpp"

using namespace tdks;

TEST_CASE("Crank-Nicolson steps are unitary per orbital") {
  for (int dim : {1, 3}) {
    const Grid g(dim, dim == 1 ? 128 : 8, 6.0);
    const auto m = testing::hartree_model(g, 1.0);
    const auto prop = Propagator::for_model(m);
    const auto psi0 = testing::two_orbitals(g);
    const auto times = uniform_knots(0.0, 0.5, 20);
    const auto traj = prop.propagate(psi0, m, DensityPath::from_trajectory(Trajectory::constant(psi0, times)));
    double drift = 0.0;
    for (const auto& s : traj.states())
      for (int j = 0; j < 2; ++j)
        drift = std::max(drift, std::abs(s.values().col(j).norm() / psi0.values().col(j).norm() - 1.0));
    CHECK(drift < (dim == 1 ? 1e-12 : 1e-10));
  }
}

TEST_CASE("free propagation of a harmonic eigenstate only rotates its phase") {
  const Grid g(1, 400, 16.0);
  ExternalPotential v;
  v.family = "harmonic";
  HartreeParams off;
  off.enabled = false;
  const PotentialModel m(g, v, off, std::nullopt);
  Eigen::MatrixXcd psi(g.size(), 1);
  for (Eigen::Index p = 0; p < g.size(); ++p) psi(p, 0) = std::exp(-std::pow(g.coordinate(p) - 8.0, 2) / 2.0);
  const OrbitalSet s0(g, psi);
  const auto prop = Propagator::for_model(m);
  const auto times = uniform_knots(0.0, 1.0, 200);
  const std::vector<Field> v_half(200, m.external_at(0.0));
  const auto traj = prop.propagate(s0, times, v_half);
  // Ground-state energy 1/2: psi(t) = exp(-i t / 2) psi0.
  const cplx overlap = inner(traj.back(), s0) / inner(s0, s0);
  CHECK(std::abs(overlap) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(std::arg(overlap) == doctest::Approx(-0.5).epsilon(1e-3));
}

TEST_CASE("time discretization error is second order") {
  // Wide box: the initial state must vanish to rounding at the walls.
  const Grid g(1, 160, 16.0);
  ExternalPotential v;
  v.family = "harmonic";
  v.drive_amplitude = 0.4;
  v.drive_frequency = 3.0;
  HartreeParams off;
  off.enabled = false;
  const PotentialModel m(g, v, off, std::nullopt);
  const auto prop = Propagator::for_model(m);
  const auto psi0 = testing::two_orbitals(g);
  auto final_state = [&](int steps) {
    const auto times = uniform_knots(0.0, 0.5, steps);
    std::vector<Field> vh;
    for (int n = 0; n < steps; ++n) vh.push_back(m.external_at(0.5 * (times[n] + times[n + 1])));
    return prop.propagate(psi0, times, vh).back();
  };
  const auto ref = final_state(1280);
  const double e1 = norm(final_state(20) - ref, NormKind::H10);
  const double e2 = norm(final_state(40) - ref, NormKind::H10);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("inhomogeneous propagation is linear in the source and zero for zero source") {
  const Grid g(1, 64, 8.0);
  const auto m = testing::hartree_model(g, 0.5);
  const auto prop = Propagator::for_model(m);
  const auto times = uniform_knots(0.0, 0.2, 8);
  Rng rng(5);
  const auto f1 = random_trajectory(g, 2, times, rng, 1.0);
  const auto f2 = random_trajectory(g, 2, times, rng, 1.0);
  const std::vector<Field> vh(8, m.external_at(0.0));
  const auto e1 = prop.propagate_inhomogeneous(f1, vh);
  const auto e2 = prop.propagate_inhomogeneous(f2, vh);
  const auto e12 = prop.propagate_inhomogeneous(f1 + 2.0 * f2, vh);
  CHECK(sup_norm(e12 - e1 - 2.0 * e2) < 1e-12);
  CHECK(norm(e1[0], NormKind::H10) == 0.0);
  CHECK(sup_norm(prop.propagate_inhomogeneous(Trajectory::zeros_like(f1), vh)) == 0.0);
}

TEST_CASE("fixed-point map: decoupled model ignores its input") {
  const Grid g(1, 64, 8.0);
  HartreeParams off;
  off.enabled = false;
  ExternalPotential v;
  v.family = "harmonic";
  const PotentialModel m(g, v, off, std::nullopt);
  const auto psi0 = testing::two_orbitals(g);
  const FixedPointMap map(m, Propagator::for_model(m), psi0, uniform_knots(0.0, 0.5, 10));
  Rng rng(1);
  const auto a = random_trajectory(g, 2, map.times(), rng, 2.0);
  CHECK(sup_norm(map(a) - map.zero_charge()) == 0.0);
  CHECK(norm(map(a)[0] - psi0, NormKind::H10) == 0.0);
}

TEST_CASE("fixed-point map: small coupling gives a small Lipschitz ratio") {
  const Grid g(1, 128, 10.0);
  const auto m = testing::hartree_model(g, 0.1, "zero");
  const auto psi0 = testing::two_orbitals(g);
  const FixedPointMap map(m, Propagator::for_model(m), psi0, uniform_knots(0.0, 0.05, 20));
  Rng rng(2);
  for (int k = 0; k < 5; ++k) {
    const auto a = random_trajectory(g, 2, map.times(), rng, 1.5);
    const auto b = random_trajectory(g, 2, map.times(), rng, 1.5);
    CHECK(sup_norm(map(a) - map(b)) < 0.05 * sup_norm(a - b));
  }
}

TEST_CASE("input validation") {
  const Grid g(1, 16, 2.0);
  const auto m = testing::hartree_model(g, 1.0);
  const auto psi0 = testing::two_orbitals(g);
  const FixedPointMap map(m, Propagator::for_model(m), psi0, uniform_knots(0.0, 0.1, 4));
  Rng rng(3);
  CHECK_THROWS_AS(map(random_trajectory(g, 2, uniform_knots(0.0, 0.1, 3), rng, 1.0)), structural_error);
  PropagatorConfig cfg;
  cfg.dt = 0.03;
  CHECK_THROWS_AS(cfg.knots(0.0, 0.1), configuration_error);
  cfg.dt = 0.025;
  CHECK(cfg.knots(0.0, 0.1).size() == 5);
  const auto prop = Propagator::for_model(m);
  CHECK_THROWS_AS(prop.propagate(psi0, uniform_knots(0.0, 0.1, 4), std::vector<Field>(3, Field::Zero(16))),
                  structural_error);
}

TEST_CASE("history carry makes the last knot's potential continuous across windows") {
  const Grid g(1, 64, 8.0);
  const auto m = testing::hartree_model(g, 0.5, "harmonic", XCParams{0.2, 0.5});
  const auto psi0 = testing::two_orbitals(g);
  const auto prop = Propagator::for_model(m);
  const FixedPointMap whole(m, prop, psi0, uniform_knots(0.0, 0.2, 8));
  Rng rng(4);
  const auto a = random_trajectory(g, 2, whole.times(), rng, 1.0);
  const auto phi_all = m.xc_phi_knots(whole.density_path(a));
  // First half as its own window.
  std::vector<double> t1(whole.times().begin(), whole.times().begin() + 5);
  std::vector<OrbitalSet> s1(a.states().begin(), a.states().begin() + 5);
  const FixedPointMap first(m, prop, psi0, t1);
  const auto carry = first.phi_end(Trajectory(t1, s1));
  REQUIRE(carry.has_value());
  CHECK((*carry - phi_all[4]).norm() < 1e-12 * phi_all[4].norm());
}

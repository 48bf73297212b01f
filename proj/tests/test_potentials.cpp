#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tdks/errors.hpp"
#include "tdks/random_fields.hpp"

using namespace tdks;

namespace {

Field direct_convolution(const Grid& g, const ConvolutionKernel& k, const Field& f) {
  Field out = Field::Zero(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i)
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const auto a = g.multi_index(i), b = g.multi_index(j);
      out(i) += k.at_offset({a[0] - b[0], a[1] - b[1], a[2] - b[2]}) * f(j);
    }
  return out * g.cell_volume();
}

DensityPath random_path(const Grid& g, const std::vector<double>& times, Rng& rng) {
  return DensityPath::from_trajectory(random_trajectory(g, 2, times, rng, 1.0));
}

}  // namespace

TEST_CASE("FFT convolution equals the direct lattice sum") {
  for (int dim : {1, 3}) {
    const Grid g(dim, dim == 1 ? 37 : 6, 4.0);
    const ConvolutionKernel k(g, [](double s) { return 1.0 / std::sqrt(s * s + 0.3); });
    Rng rng(4);
    const Field f = random_rough_field(g, rng);
    CHECK((k.apply(f) - direct_convolution(g, k, f)).norm() <= 1e-12 * f.norm());
  }
}

TEST_CASE("discrete Young inequalities hold with stencil norms") {
  const Grid g(1, 64, 8.0);
  const ConvolutionKernel k(g, [](double s) { return std::exp(-s * s); });
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const Field f = random_rough_field(g, rng);
    CHECK(lp_norm(g, k.apply(f), 2.0) <= k.l1_norm() * lp_norm(g, f, 2.0) * (1 + 1e-12));
    CHECK(lp_norm(g, k.apply(f), INFINITY) <= k.l2_norm() * lp_norm(g, f, 2.0) * (1 + 1e-12));
  }
}

TEST_CASE("kernel is even on the stencil") {
  const Grid g(3, 5, 3.0);
  const ConvolutionKernel k(g, [](double s) { return 1.0 / (1.0 + s); });
  CHECK(k.at_offset({1, -2, 3}) == doctest::Approx(k.at_offset({-1, 2, -3})));
  CHECK_THROWS_AS(k.at_offset({5, 0, 0}), range_error);
}

TEST_CASE("external potential families") {
  const Grid g(1, 31, 2.0);
  ExternalPotential v;
  v.family = "harmonic";
  v.omega = 2.0;
  v.drive_amplitude = 0.5;
  v.drive_frequency = 3.0;
  const Field v0 = v.value(g, 0.0);
  CHECK(v0.minCoeff() >= 0.0);
  // Centre of the box is a grid point for odd n.
  CHECK(v0(15) == doctest::Approx(0.0));
  const double t = 0.3, e = 1e-6;
  const Field fd = (v.value(g, t + e) - v.value(g, t - e)) / (2 * e);
  CHECK((fd - v.time_derivative(g, t)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_FALSE(v.is_static());
  ExternalPotential bad;
  bad.family = "morse";
  CHECK_THROWS_AS(bad.validate(), configuration_error);
  bad.family = "constant";
  bad.offset = -1.0;
  CHECK_THROWS_AS(bad.validate(), model_violation);
}

TEST_CASE("disabled components are configuration errors") {
  const Grid g(1, 16, 2.0);
  ExternalPotential v;
  HartreeParams off;
  off.enabled = false;
  const PotentialModel m(g, v, off, std::nullopt);
  CHECK_FALSE(m.coupled());
  CHECK_THROWS_AS(m.hartree_kernel(), configuration_error);
  CHECK_THROWS_AS(m.xc(), configuration_error);
}

TEST_CASE("density path interpolation and range") {
  const Grid g(1, 16, 2.0);
  Rng rng(1);
  const auto path = random_path(g, uniform_knots(0.0, 1.0, 4), rng);
  const Field mid = path.at(0.125);
  CHECK((mid - 0.5 * (path.rho[0] + path.rho[1])).norm() < 1e-13);
  CHECK_THROWS_AS(path.at(1.5), range_error);
}

TEST_CASE("history potential starts at phi0 and integrates by the trapezoid rule") {
  const Grid g(1, 40, 5.0);
  const auto m = testing::hartree_model(g, 1.0, "zero", XCParams{0.3, 0.7});
  Rng rng(6);
  const auto times = uniform_knots(0.0, 0.4, 4);
  const auto path = random_path(g, times, rng);
  const auto phi = m.xc_phi_knots(path);
  CHECK((phi[0] - m.xc().phi0(path.rho[0])).norm() < 1e-13);
  Field expect = phi[0];
  for (std::size_t k = 1; k < times.size(); ++k) {
    expect += 0.5 * (times[k] - times[k - 1]) * (m.xc().rate(path.rho[k - 1]) + m.xc().rate(path.rho[k]));
    CHECK((phi[k] - expect).norm() < 1e-12);
  }
  CHECK((m.xc_phi(path, times[2]) - phi[2]).norm() < 1e-12);
}

TEST_CASE("step potentials are affine in the density with the declared increment") {
  const Grid g(1, 48, 6.0);
  const auto m = testing::hartree_model(g, 0.8, "harmonic", XCParams{0.2, 0.5});
  Rng rng(12);
  const auto times = uniform_knots(0.0, 0.3, 6);
  const auto a = random_path(g, times, rng);
  const auto b = random_path(g, times, rng);
  std::vector<Field> d;
  for (std::size_t k = 0; k < times.size(); ++k) d.push_back(a.rho[k] - b.rho[k]);
  const auto va = m.step_potentials(a);
  const auto vb = m.step_potentials(b);
  const auto dv = m.step_potential_increments(times, d);
  for (std::size_t n = 0; n < dv.size(); ++n) CHECK((va[n] - vb[n] - dv[n]).norm() < 1e-11 * va[n].norm());
}

TEST_CASE("step potential equals the effective potential at the midpoint") {
  const Grid g(1, 32, 4.0);
  const auto m = testing::hartree_model(g, 1.0, "harmonic", XCParams{0.1, 0.4});
  Rng rng(2);
  const auto times = uniform_knots(0.0, 0.2, 4);
  const auto path = random_path(g, times, rng);
  const auto v = m.step_potentials(path);
  for (std::size_t n = 0; n + 1 < times.size(); ++n) {
    const Field ref = m.effective_potential(0.5 * (times[n] + times[n + 1]), path);
    CHECK((v[n] - ref).norm() < 1e-12 * ref.norm());
  }
}

TEST_CASE("Hartree potential is nonnegative for nonnegative density") {
  const Grid g(1, 64, 8.0);
  const auto m = testing::hartree_model(g, 1.0);
  Rng rng(3);
  const Field rho = density(random_state(g, 2, rng));
  CHECK(m.hartree(rho).minCoeff() >= 0.0);
  CHECK(m.hartree(Field::Zero(g.size())).norm() == 0.0);
}

TEST_CASE("3D Hartree kernel is finite at the origin with zero radius") {
  const Grid g(3, 6, 3.0);
  HartreeParams hp;
  hp.radius = 0.0;
  const PotentialModel m(g, ExternalPotential{}, hp, std::nullopt);
  CHECK(std::isfinite(m.hartree_kernel().at_offset({0, 0, 0})));
  CHECK(m.hartree_kernel().at_offset({0, 0, 0}) > m.hartree_kernel().at_offset({1, 0, 0}));
}

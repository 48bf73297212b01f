#include "tdks/random_fields.hpp"

#include <cmath>
#include <numbers>

namespace tdks {

Field random_smooth_field(const Grid& grid, Rng& rng, int max_mode, double decay) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = grid.points_per_axis();
  const int kmax = std::min(max_mode, n);
  const double pi_over_l = std::numbers::pi / grid.axis_length();

  // Per-axis sine tables, then a tensor sum over modes.
  Eigen::MatrixXd table(n, kmax);
  for (int k = 0; k < kmax; ++k)
    for (int i = 0; i < n; ++i) table(i, k) = std::sin((k + 1) * pi_over_l * grid.coordinate(i));

  Field f = Field::Zero(grid.size());
  const int modes_per_axis = grid.dim() == 1 ? kmax : std::min(kmax, 4);
  std::array<int, 3> k{0, 0, 0};
  const int total = static_cast<int>(std::pow(modes_per_axis, grid.dim()));
  for (int m = 0; m < total; ++m) {
    int rem = m;
    double k2 = 0.0;
    for (int a = 0; a < grid.dim(); ++a) {
      k[a] = rem % modes_per_axis;
      rem /= modes_per_axis;
      k2 += (k[a] + 1.0) * (k[a] + 1.0);
    }
    const double c = normal(rng) * std::pow(1.0 + k2, -decay / 2.0);
    for (Eigen::Index p = 0; p < f.size(); ++p) {
      const auto idx = grid.multi_index(p);
      double v = c;
      for (int a = 0; a < grid.dim(); ++a) v *= table(idx[a], k[a]);
      f(p) += v;
    }
  }
  return f;
}

Field random_rough_field(const Grid& grid, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Field f(grid.size());
  for (Eigen::Index p = 0; p < f.size(); ++p) f(p) = normal(rng);
  return f;
}

OrbitalSet random_state(const Grid& grid, int n_orbitals, Rng& rng, bool smooth) {
  Eigen::MatrixXcd v(grid.size(), n_orbitals);
  for (int j = 0; j < n_orbitals; ++j) {
    const Field re = smooth ? random_smooth_field(grid, rng) : random_rough_field(grid, rng);
    const Field im = smooth ? random_smooth_field(grid, rng) : random_rough_field(grid, rng);
    for (Eigen::Index p = 0; p < v.rows(); ++p) v(p, j) = cplx(re(p), im(p));
  }
  return OrbitalSet(grid, std::move(v));
}

OrbitalSet random_state_with_norm(const Grid& grid, int n_orbitals, Rng& rng, double h10, bool smooth) {
  OrbitalSet s = random_state(grid, n_orbitals, rng, smooth);
  const double nrm = norm(s, NormKind::H10);
  if (nrm > 0.0) s *= cplx(h10 / nrm, 0.0);
  return s;
}

Trajectory random_trajectory(const Grid& grid, int n_orbitals, const std::vector<double>& times, Rng& rng,
                             double sup_h10) {
  // Linear blend between two random endpoint states, plus a small oscillating part.
  const OrbitalSet a = random_state(grid, n_orbitals, rng);
  const OrbitalSet b = random_state(grid, n_orbitals, rng);
  const OrbitalSet c = random_state(grid, n_orbitals, rng);
  std::uniform_real_distribution<double> unif(0.0, 2.0 * std::numbers::pi);
  const double phase = unif(rng);
  std::vector<OrbitalSet> states;
  states.reserve(times.size());
  const double t0 = times.front();
  const double span = times.size() > 1 ? times.back() - t0 : 1.0;
  for (double t : times) {
    const double s = (t - t0) / span;
    OrbitalSet st = (1.0 - s) * a;
    st += cplx(s, 0.0) * b;
    st += cplx(0.3 * std::sin(2.0 * std::numbers::pi * s + phase), 0.0) * c;
    states.push_back(std::move(st));
  }
  Trajectory traj(times, std::move(states));
  const double m = sup_norm(traj);
  if (m > 0.0) traj *= sup_h10 / m;
  return traj;
}

}  // namespace tdks

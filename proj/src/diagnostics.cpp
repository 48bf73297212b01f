#include "tdks/diagnostics.hpp"

#include <cmath>

#include "tdks/errors.hpp"
#include "tdks/newton_exact.hpp"

namespace tdks {

namespace {

// V_e(t_k, rho) at every knot of the path.
std::vector<Field> knot_potentials(const PotentialModel& model, const DensityPath& path) {
  const auto phi = model.xc_phi_knots(path);
  std::vector<Field> out;
  out.reserve(path.times.size());
  for (std::size_t k = 0; k < path.times.size(); ++k) {
    Field v = model.external_at(path.times[k]);
    if (model.hartree_enabled()) v += model.hartree(path.rho[k]);
    if (model.xc_enabled()) v += phi[k];
    out.push_back(std::move(v));
  }
  return out;
}

// K(a) - K(b) given rho_a - rho_b, from the exact step relation
// (I + i tau H_a) eta+ = (I - i tau H_a) eta - i tau dv (psi_b + psi_b+).
Trajectory difference_from_increment(const FixedPointMap& map, const Trajectory& b, const std::vector<Field>& drho) {
  const auto vb = map.step_potentials(b);
  const Trajectory kb = map.propagator().propagate(map.psi0(), map.times(), vb);
  const auto dv = map.model().step_potential_increments(map.times(), drho, !map.phi_carry().has_value());
  std::vector<Field> va = vb;
  StepSource src;
  for (std::size_t n = 0; n < dv.size(); ++n) {
    va[n] += dv[n];
    src.left.push_back(multiply(dv[n], kb[n]));
    src.right.push_back(multiply(dv[n], kb[n + 1]));
  }
  if (dv.empty()) return Trajectory::zeros_like(b);
  return map.propagator().propagate_inhomogeneous(src, map.times(), va);
}

double relative_error(const Trajectory& approx, const Trajectory& exact) {
  const double scale = sup_norm(exact);
  const double diff = sup_norm(approx - exact);
  return scale > 0.0 ? diff / scale : diff;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0.0 && y[i] > 0.0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2) return 0.0;
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Eigen::VectorXd flatten(const Trajectory& t) {
  const Eigen::Index per = t.grid().size() * t.n_orbitals();
  Eigen::VectorXd v(2 * per * static_cast<Eigen::Index>(t.knots()));
  Eigen::Index i = 0;
  for (const auto& s : t.states())
    for (Eigen::Index c = 0; c < s.values().size(); ++c) {
      v(i++) = s.values().data()[c].real();
      v(i++) = s.values().data()[c].imag();
    }
  return v;
}

Trajectory basis_vector(const Trajectory& shape, Eigen::Index dof) {
  Trajectory t = Trajectory::zeros_like(shape);
  const Eigen::Index per = 2 * shape.grid().size() * shape.n_orbitals();
  const auto knot = static_cast<std::size_t>(dof / per);
  const Eigen::Index within = dof % per;
  t[knot].values().data()[within / 2] = within % 2 == 0 ? cplx(1.0, 0.0) : cplx(0.0, 1.0);
  return t;
}

}  // namespace

EnergyValues energy(const OrbitalSet& state, double t, const Field& phi, const PotentialModel& model) {
  require_same_grid(state.grid(), model.grid(), "energy");
  const double cell = model.grid().cell_volume();
  const Field rho = density(state);
  const Field v = model.external_at(t) + phi;
  const double kinetic = model.hbar() * model.hbar() / (4.0 * model.mass()) * gradient_norm_squared(state);
  double hartree_pair = 0.0;
  if (model.hartree_enabled()) hartree_pair = model.hartree(rho).dot(rho) * cell;
  EnergyValues e;
  e.script = kinetic + 0.25 * hartree_pair + 0.5 * v.dot(rho) * cell;
  e.physical = 2.0 * e.script + 0.5 * hartree_pair;
  return e;
}

EnergyValues energy(const OrbitalSet& state, double t, const DensityPath& path, const PotentialModel& model) {
  const Field phi = model.xc_enabled() ? model.xc_phi(path, t) : Field::Zero(model.grid().size());
  return energy(state, t, phi, model);
}

std::vector<double> energy_identity_residual(const Trajectory& traj, const PotentialModel& model,
                                             const std::optional<Field>& phi_carry) {
  const DensityPath path = DensityPath::from_trajectory(traj, phi_carry);
  const auto phi = model.xc_phi_knots(path);
  const double cell = model.grid().cell_volume();
  std::vector<double> out(traj.knots(), 0.0);
  const double e0 = energy(traj[0], traj.times()[0], phi[0], model).script;
  double integral = 0.0;
  double prev = 0.0;
  for (std::size_t k = 0; k < traj.knots(); ++k) {
    const double t = traj.times()[k];
    Field rate = model.external().time_derivative(model.grid(), t);
    if (model.xc_enabled()) rate += model.xc().rate(path.rho[k]);
    const double integrand = rate.dot(path.rho[k]) * cell;
    if (k > 0) integral += 0.5 * (t - traj.times()[k - 1]) * (prev + integrand);
    prev = integrand;
    out[k] = energy(traj[k], t, phi[k], model).script - e0 - 0.5 * integral;
  }
  return out;
}

double duhamel_identity_residual(const OrbitalSet& psi0, const DensityPath& rho1, const DensityPath& rho2,
                                 const PotentialModel& model, const Propagator& propagator) {
  if (rho1.times != rho2.times) throw structural_error("duhamel identity: density paths on different knots");
  const auto v1 = model.step_potentials(rho1);
  const auto v2 = model.step_potentials(rho2);
  const Trajectory psi1 = propagator.propagate(psi0, rho1.times, v1);
  const Trajectory psi2 = propagator.propagate(psi0, rho2.times, v2);
  if (psi1.knots() < 2) return 0.0;
  const auto k1 = knot_potentials(model, rho1);
  const auto k2 = knot_potentials(model, rho2);
  std::vector<OrbitalSet> src;
  src.reserve(psi2.knots());
  for (std::size_t k = 0; k < psi2.knots(); ++k) src.push_back(multiply(k1[k] - k2[k], psi2[k]));
  const Trajectory eta = propagator.propagate_inhomogeneous(Trajectory(rho1.times, std::move(src)), v1);
  return sup_norm(psi1 - psi2 - eta);
}

CheckResult hartree_product_bound_check(const Field& f, const Field& g, const OrbitalSet& psi,
                                        const PotentialModel& model, const EmbeddingConstants& e) {
  const Grid& grid = model.grid();
  CheckResult r;
  r.name = "hartree_product_bound";
  const Field w = model.hartree(f.cwiseProduct(g));
  r.lhs = norm(multiply(w, psi), NormKind::H10);
  r.rhs = lemma_constant(model.hartree_kernel(), e) * h10_norm(grid, f) * h10_norm(grid, g) * norm(psi, NormKind::H10);
  r.pass = r.lhs <= r.rhs;
  return r;
}

CheckResult hartree_lipschitz_check(const OrbitalSet& psi1, const OrbitalSet& psi2, const OrbitalSet& psi,
                                    const PotentialModel& model, const EmbeddingConstants& e) {
  CheckResult r;
  r.name = "hartree_lipschitz";
  const Field w = model.hartree(density(psi1) - density(psi2));
  r.lhs = norm(multiply(w, psi), NormKind::H10);
  r.rhs = lemma_constant(model.hartree_kernel(), e) * norm(psi1 - psi2, NormKind::H10) *
          (norm(psi1, NormKind::H10) + norm(psi2, NormKind::H10)) * norm(psi, NormKind::H10);
  r.pass = r.lhs <= r.rhs;
  return r;
}

double potential_lipschitz_ratio(const Trajectory& psi1, const Trajectory& psi2, const OrbitalSet& psi,
                                 const FixedPointMap& map) {
  const auto v1 = knot_potentials(map.model(), map.density_path(psi1));
  const auto v2 = knot_potentials(map.model(), map.density_path(psi2));
  double lhs = 0.0;
  for (std::size_t k = 0; k < v1.size(); ++k) lhs = std::max(lhs, norm(multiply(v1[k] - v2[k], psi), NormKind::H10));
  const double den = sup_norm(psi1 - psi2) * norm(psi, NormKind::H10);
  return den > 0.0 ? lhs / den : 0.0;
}

CheckResult potential_lipschitz_check(const Trajectory& psi1, const Trajectory& psi2, const OrbitalSet& psi,
                                      const FixedPointMap& map, double C) {
  CheckResult r;
  r.name = "potential_lipschitz";
  const double den = sup_norm(psi1 - psi2) * norm(psi, NormKind::H10);
  r.lhs = potential_lipschitz_ratio(psi1, psi2, psi, map) * den;
  r.rhs = C * den;
  r.pass = r.lhs <= r.rhs;
  return r;
}

OrderFit convergence_order(const std::vector<double>& residuals, double floor) {
  std::vector<double> pre;
  for (double r : residuals) {
    if (!(r > floor) || !std::isfinite(r)) break;
    pre.push_back(r);
  }
  if (pre.size() < 3) throw diagnostic_error("convergence order needs at least 3 residuals above the floor");
  std::vector<double> x(pre.begin(), pre.end() - 1), y(pre.begin() + 1, pre.end());
  OrderFit fit;
  fit.points = static_cast<int>(pre.size());
  fit.order = loglog_slope(x, y);
  // Coefficient of determination of the log-log line.
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double ss_tot = 0, ss_res = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    const double pred = my + fit.order * (lx - mx);
    ss_res += (ly - pred) * (ly - pred);
    ss_tot += (ly - my) * (ly - my);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

Trajectory map_difference(const FixedPointMap& map, const Trajectory& a, const Trajectory& b) {
  std::vector<Field> drho;
  for (std::size_t k = 0; k < a.knots(); ++k) drho.push_back(density(a[k]) - density(b[k]));
  return difference_from_increment(map, b, drho);
}

FdTable gateaux_fd_check(const FixedPointMap& map, const Trajectory& base, const Trajectory& omega,
                         const std::vector<double>& epsilons) {
  FdTable table;
  const Trajectory exact = kprime_apply(map, base, omega);
  std::vector<Field> pair;
  for (std::size_t k = 0; k < base.knots(); ++k) pair.push_back(pair_density(base[k], omega[k]));
  std::vector<double> eps_list, central, one_sided;
  for (double eps : epsilons) {
    // |P + e w|^2 - |P - e w|^2 = 4 e Re(conj(P) w), exactly.
    std::vector<Field> dc, d1;
    for (std::size_t k = 0; k < pair.size(); ++k) {
      dc.push_back(4.0 * eps * pair[k]);
      d1.push_back(2.0 * eps * pair[k] + eps * eps * density(omega[k]));
    }
    Trajectory minus = base;
    {
      Trajectory w = omega;
      w *= eps;
      minus -= w;
    }
    Trajectory qc = difference_from_increment(map, minus, dc);
    qc *= 1.0 / (2.0 * eps);
    Trajectory q1 = difference_from_increment(map, base, d1);
    q1 *= 1.0 / eps;
    FdRow row;
    row.eps = eps;
    row.central_error = relative_error(qc, exact);
    row.one_sided_error = relative_error(q1, exact);
    table.rows.push_back(row);
    eps_list.push_back(eps);
    central.push_back(row.central_error);
    one_sided.push_back(row.one_sided_error);
  }
  table.central_slope = loglog_slope(eps_list, central);
  table.one_sided_slope = loglog_slope(eps_list, one_sided);
  return table;
}

double central_fd_error(const FixedPointMap& map, const Trajectory& base, const Trajectory& omega, double eps) {
  Trajectory w = omega;
  w *= eps;
  Trajectory q = map(base + w) - map(base - w);
  q *= 1.0 / (2.0 * eps);
  return relative_error(q, kprime_apply(map, base, omega));
}

JacobianCheck dense_jacobian_check(const FixedPointMap& map, const Trajectory& base, double eps) {
  const Eigen::Index dofs = flatten(base).size();
  if (dofs > 4096) throw diagnostic_error("dense Jacobian check is limited to tiny problems");
  Eigen::MatrixXd fd(dofs, dofs), lin(dofs, dofs);
  const Linearization l(map, base);
  for (Eigen::Index c = 0; c < dofs; ++c) {
    Trajectory e = basis_vector(base, c);
    lin.col(c) = flatten(l.apply(e));
    e *= eps;
    fd.col(c) = (flatten(map(base + e)) - flatten(map(base - e))) / (2.0 * eps);
  }
  JacobianCheck out;
  out.dofs = dofs;
  const double scale = lin.norm();
  out.relative_frobenius = scale > 0.0 ? (fd - lin).norm() / scale : (fd - lin).norm();
  return out;
}

double zero_force_value(const Trajectory& traj, const PotentialModel& model, const std::optional<Field>& phi_carry) {
  if (!model.xc_enabled()) return 0.0;
  const Grid& g = model.grid();
  const DensityPath path = DensityPath::from_trajectory(traj, phi_carry);
  const auto phi = model.xc_phi_knots(path);
  const int n = g.points_per_axis();
  double worst = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    double total = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const Eigen::Index st = g.stride(a);
      double s = 0.0;
      for (Eigen::Index p = 0; p < g.size(); ++p) {
        if (g.multi_index(p)[a] == n - 1) continue;
        s += 0.5 * (path.rho[k](p) + path.rho[k](p + st)) * (phi[k](p + st) - phi[k](p)) / g.spacing();
      }
      s *= g.cell_volume();
      total += s * s;
    }
    worst = std::max(worst, std::sqrt(total));
  }
  return worst;
}

}  // namespace tdks

#include "tdks/newton_exact.hpp"

#include <chrono>
#include <cmath>
#include <memory>

#include "tdks/errors.hpp"

namespace tdks {

namespace {

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Trajectory unit_probe(const FixedPointMap& map, Rng& rng) {
  return random_trajectory(map.psi0().grid(), map.psi0().n_orbitals(), map.times(), rng, 1.0);
}

}  // namespace

Linearization::Linearization(const FixedPointMap& map, Trajectory base) : map_(&map), base_(std::move(base)) {
  v_half_ = map.step_potentials(base_);
  image_ = map.propagator().propagate(map.psi0(), map.times(), v_half_);
}

Trajectory Linearization::apply(const Trajectory& omega) const {
  ++applications_;
  const FixedPointMap& map = *map_;
  if (omega.knots() != base_.knots()) throw structural_error("kprime_apply: knot count mismatch");
  if (!map.model().coupled() || base_.knots() < 2) return Trajectory::zeros_like(omega);
  std::vector<Field> drho;
  drho.reserve(base_.knots());
  for (std::size_t k = 0; k < base_.knots(); ++k) drho.push_back(2.0 * pair_density(base_[k], omega[k]));
  const auto dv = map.model().step_potential_increments(map.times(), drho, !map.phi_carry().has_value());
  StepSource src;
  src.left.reserve(dv.size());
  src.right.reserve(dv.size());
  for (std::size_t n = 0; n < dv.size(); ++n) {
    src.left.push_back(multiply(dv[n], image_[n]));
    src.right.push_back(multiply(dv[n], image_[n + 1]));
  }
  return map.propagator().propagate_inhomogeneous(src, map.times(), v_half_);
}

Trajectory kprime_apply(const FixedPointMap& map, const Trajectory& base, const Trajectory& omega) {
  return Linearization(map, base).apply(omega);
}

double kprime_norm_bound(const ConstantsBundle& b, double T, double base_norm) {
  const double factor = b.mode == "analytic" && b.step_growth < 1.0 ? 1.0 / (1.0 - b.step_growth) : 1.0;
  return 2.0 * b.C0 * T / b.hbar * b.U_bound * b.U_bound * b.psi0_h10 * factor * base_norm;
}

LinearSolveResult solve_linearized(const Linearization& lin, const Trajectory& f, double tol, int max_iters,
                                   std::optional<double> bound_hint) {
  if (bound_hint && *bound_hint >= 1.0)
    throw window_too_long("derivative bound >= 1: the linearized fixed-point sweep is not contractive");
  LinearSolveResult out;
  // psi_{k+1} - psi_k = K' (psi_k - psi_{k-1}); carrying the increment directly
  // keeps the update free of cancellation, so it decays below rounding level.
  Trajectory psi = f;
  Trajectory increment = f;
  double prev_update = -1.0;
  int growing = 0;
  for (int it = 1; it <= max_iters; ++it) {
    increment = lin.apply(increment);
    psi += increment;
    const double update = sup_norm(increment);
    out.iterations = it;
    out.last_update = update;
    if (prev_update > 0.0) {
      out.rate = update / prev_update;
      growing = out.rate >= 1.0 ? growing + 1 : 0;
      if (growing >= 3 && update > tol)
        throw window_too_long("linearized sweep is not contracting; shrink the window");
    }
    if (update <= tol) {
      out.solution = std::move(psi);
      return out;
    }
    prev_update = update;
  }
  throw solver_error("linearized sweep did not reach tolerance", out.last_update);
}

KappaSigma newton_constants(double c_lip, double tau, double alpha, double h, double inverse_norm_at_root) {
  if (!(tau > 0.0 && tau < 1.0) || !(alpha > 0.0 && alpha < 1.0) || !(h > 0.0 && h <= 0.5))
    throw configuration_error("Newton parameters need tau, alpha in (0,1) and 0 < h <= 1/2");
  if (!(c_lip >= 0.0) || !(inverse_norm_at_root > 0.0))
    throw configuration_error("Lipschitz constant and inverse norm must be positive");
  KappaSigma ks;
  ks.kappa = inverse_norm_at_root / (1.0 - tau);
  const double base = c_lip * ks.kappa * ks.kappa / h;
  ks.sigma = std::max(base, base * (1.0 - tau) / ((1.0 - alpha) * tau));
  return ks;
}

double estimate_inverse_norm(const Linearization& lin, int samples, Rng& rng, double tol) {
  double best = 1.0;
  for (int k = 0; k < samples; ++k) {
    const Trajectory f = unit_probe(lin.map(), rng);
    const auto sol = solve_linearized(lin, f, tol);
    best = std::max(best, sup_norm(sol.solution) / sup_norm(f));
  }
  return best;
}

double estimate_kprime_norm(const Linearization& lin, int probes, Rng& rng, int power_steps) {
  double best = 0.0;
  for (int k = 0; k < probes; ++k) {
    Trajectory w = unit_probe(lin.map(), rng);
    for (int s = 0; s <= power_steps; ++s) {
      const double nw = sup_norm(w);
      if (!(nw > 0.0)) break;
      Trajectory kw = lin.apply(w);
      const double nk = sup_norm(kw);
      best = std::max(best, nk / nw);
      if (!(nk > 0.0)) break;
      w = std::move(kw);
      w *= 1.0 / nk;
    }
  }
  return best;
}

double estimate_derivative_lipschitz(const FixedPointMap& map, double radius, int pairs, Rng& rng,
                                     const std::optional<Trajectory>& centre) {
  if (!map.model().coupled()) return 0.0;
  std::uniform_real_distribution<double> frac(0.2, 1.0);
  std::uniform_real_distribution<double> small(1e-3, 1e-1);
  double best = 0.0;
  for (int k = 0; k < pairs; ++k) {
    // With a centre the pairs stay inside the ball around it; otherwise around zero.
    Trajectory a = random_trajectory(map.psi0().grid(), map.psi0().n_orbitals(), map.times(), rng,
                                     radius * frac(rng));
    if (centre) {
      if (k % 2 == 0) a = *centre;
      else a += *centre;
    }
    Trajectory d = unit_probe(map, rng);
    d *= small(rng) * radius;
    Trajectory b = a + d;
    const Linearization la(map, a), lb(map, b);
    const double dist = sup_norm(a - b);
    for (int p = 0; p < 2; ++p) {
      const Trajectory w = unit_probe(map, rng);
      best = std::max(best, sup_norm(la.apply(w) - lb.apply(w)) / (dist * sup_norm(w)));
    }
  }
  return best;
}

double analytic_derivative_lipschitz(const ConstantsBundle& b) {
  const double T = b.window_length;
  return 2.0 * T * b.C0 * b.U_bound / b.hbar * (2.0 * b.r * b.gamma_t + b.U_bound * b.psi0_h10);
}

double newton_error_bound(double kappa, double sigma, double h, int k) {
  // sigma = 0: K' is constant and the first step is exact.
  if (!(sigma > 0.0)) return 0.0;
  const double base = 1.0 - std::sqrt(1.0 - 2.0 * h);
  return kappa / (h * sigma) * std::pow(base, std::pow(2.0, k)) / std::pow(2.0, k);
}

NewtonResult newton_solve(const FixedPointMap& map, const Trajectory& u0, const NewtonParams& p) {
  NewtonResult out;
  out.trace.solver = "newton";
  out.trace.floor = p.residual_floor();
  auto t0 = std::chrono::steady_clock::now();
  Trajectory u = u0;
  auto lin = std::make_unique<Linearization>(map, u);
  double res = sup_norm(u - lin->image());
  {
    IterationRecord rec;
    rec.iter = 0;
    rec.residual = res;
    rec.wall_seconds = elapsed(t0);
    out.trace.records.push_back(rec);
  }
  if (p.enforce_preconditions) {
    if (res > 1.0 / p.sigma)
      throw consistency_error("initial residual exceeds 1/sigma; run more Picard steps before Newton");
    if (p.q > 0.0 && p.q < 1.0 && p.delta > 0.0 && res / (1.0 - p.q) > p.alpha * p.delta)
      throw consistency_error("initial iterate is not inside the ball of radius alpha * delta");
  }
  const double r_init = res;
  int k = 0;
  while (res > p.residual_floor() && k < p.max_newton_iters) {
    t0 = std::chrono::steady_clock::now();
    ++k;
    Trajectory s = u - lin->image();
    const auto inner = solve_linearized(*lin, s, p.linearized_tol, p.linearized_max_iters);
    out.inner_iterations += inner.iterations;
    u -= inner.solution;
    lin = std::make_unique<Linearization>(map, u);
    const double next = sup_norm(u - lin->image());
    IterationRecord rec;
    rec.iter = k;
    rec.residual = next;
    rec.step_norm = sup_norm(inner.solution);
    rec.kanone_rhs = p.kappa * res;
    rec.kantwo_lhs = next;
    rec.kantwo_rhs = 0.5 * p.h * p.sigma * res * res;
    rec.kprime_applies = inner.iterations;
    rec.wall_seconds = elapsed(t0);
    out.trace.records.push_back(rec);
    if (!std::isfinite(next) || next > 1e3 * std::max(r_init, 1e-300))
      throw nonconvergence_error("Newton iteration diverged", out.trace);
    res = next;
  }
  out.trace.converged = res <= p.residual_floor();
  if (!out.trace.converged) throw nonconvergence_error("Newton iteration did not reach the residual floor", out.trace);
  out.solution = std::move(u);
  out.error_bound = newton_error_bound(p.kappa, p.sigma, p.h, k);
  return out;
}

}  // namespace tdks

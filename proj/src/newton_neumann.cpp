#include "tdks/newton_neumann.hpp"

#include <chrono>
#include <cmath>
#include <memory>

#include "tdks/errors.hpp"

namespace tdks {

double neumann_M(double K0, double c_lip) {
  if (!(K0 < 1.0)) throw window_too_long("derivative norm bound K0 >= 1; the Neumann series needs a shorter window");
  return std::max(1.0 / (1.0 - K0), 0.5 * c_lip);
}

double approx_newton_sigma(double M, double h, double alpha, double delta) {
  if (!(delta > 0.0)) throw configuration_error("ball radius must be positive");
  return 2.0 * (M + M * M * M) / h * std::max(1.0, 1.0 / ((1.0 - alpha) * delta));
}

Trajectory neumann_apply(const Linearization& lin, const Trajectory& f, int n) {
  if (n < 0) throw configuration_error("Neumann order must be nonnegative");
  Trajectory sum = f;
  Trajectory term = f;
  for (int k = 1; k <= n; ++k) {
    term = lin.apply(term);
    sum += term;
  }
  return sum;
}

Truncation choose_truncation(double residual_norm, double est, int n_max) {
  Truncation t;
  if (residual_norm == 0.0) {
    t.n = 0;
    t.exact_inverse = true;
    return t;
  }
  if (!(est < 1.0)) throw window_too_long("derivative norm estimate >= 1; the Neumann series needs a shorter window");
  if (!(residual_norm > 0.0)) throw configuration_error("residual norm must be nonnegative");
  if (est <= 0.0 || residual_norm >= est) return t;
  int n = 1;
  double p = est;
  while (p > residual_norm && n < n_max) {
    ++n;
    p *= est;
  }
  t.n = n;
  t.capped = p > residual_norm;
  return t;
}

double approx_inverse_defect(const Linearization& lin, int n, int probe_count, Rng& rng) {
  double best = 0.0;
  for (int k = 0; k < probe_count; ++k) {
    Trajectory w = random_trajectory(lin.map().psi0().grid(), lin.map().psi0().n_orbitals(), lin.map().times(), rng, 1.0);
    const double n0 = sup_norm(w);
    for (int j = 0; j <= n; ++j) w = lin.apply(w);
    best = std::max(best, sup_norm(w) / n0);
  }
  return best;
}

ApproxNewtonResult approx_newton_solve(const FixedPointMap& map, const Trajectory& u0, const NeumannPolicy& policy,
                                       const NewtonParams& p, std::uint64_t probe_seed, int defect_probes) {
  if (!(policy.K0 < 1.0))
    throw window_too_long("derivative norm bound K0 >= 1: the truncated Neumann series is not available on this window");
  Rng rng(probe_seed);
  ApproxNewtonResult out;
  out.trace.solver = policy.fixed_n > 0 ? "approx_newton_fixed" : "approx_newton";
  out.trace.floor = p.residual_floor();
  auto t0 = std::chrono::steady_clock::now();
  Trajectory u = u0;
  auto lin = std::make_unique<Linearization>(map, u);
  double res = sup_norm(u - lin->image());
  {
    IterationRecord rec;
    rec.iter = 0;
    rec.residual = res;
    out.trace.records.push_back(rec);
  }
  if (p.enforce_preconditions) {
    if (res > 1.0 / p.sigma)
      throw consistency_error("initial residual exceeds 1/sigma; run more Picard steps before approximate Newton");
    if (p.q > 0.0 && p.q < 1.0 && p.delta > 0.0 && res / (1.0 - p.q) > p.alpha * p.delta)
      throw consistency_error("initial iterate is not inside the ball of radius alpha * delta");
  }
  const double r_init = res;
  int k = 0;
  while (res > p.residual_floor() && k < p.max_newton_iters) {
    t0 = std::chrono::steady_clock::now();
    ++k;
    const int n = policy.fixed_n > 0 ? policy.fixed_n : choose_truncation(res, policy.K0, policy.n_max).n;
    const int before = lin->applications();
    const Trajectory s = u - lin->image();
    const Trajectory step = neumann_apply(*lin, s, n);
    const int spent = lin->applications() - before;
    const double defect = defect_probes > 0 ? approx_inverse_defect(*lin, n, defect_probes, rng) : 0.0;
    u -= step;
    lin = std::make_unique<Linearization>(map, u);
    const double next = sup_norm(u - lin->image());
    IterationRecord rec;
    rec.iter = k;
    rec.residual = next;
    rec.step_norm = sup_norm(step);
    rec.kanone_rhs = policy.M * res;
    rec.kantwo_lhs = next;
    rec.kantwo_rhs = 0.5 * p.h * p.sigma * res * res;
    rec.neumann_n = n;
    rec.defect_measured = defect;
    rec.m_times_residual = policy.M * res;
    rec.kprime_applies = spent;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.trace.records.push_back(rec);
    if (!std::isfinite(next) || next > 1e3 * std::max(r_init, 1e-300))
      throw nonconvergence_error("approximate Newton iteration diverged", out.trace);
    res = next;
  }
  out.trace.converged = res <= p.residual_floor();
  if (!out.trace.converged && policy.fixed_n == 0)
    throw nonconvergence_error("approximate Newton iteration did not reach the residual floor", out.trace);
  out.solution = std::move(u);
  out.error_bound = newton_error_bound(policy.M, p.sigma, p.h, k);
  return out;
}

}  // namespace tdks

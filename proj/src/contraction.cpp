#include "tdks/contraction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "tdks/diagnostics.hpp"
#include "tdks/errors.hpp"

namespace tdks {

namespace {

double pow_abs(double x, double p) { return std::pow(std::abs(x), p); }

// Nonlinear power iteration for max ||f||_p / ||f||_H10: the maximizer solves
// (I - Lap) f = lambda |f|^{p-2} f, and each sweep does not decrease the ratio.
double refine_ratio(const Grid& grid, Field f, double p, int sweeps) {
  double best = sobolev_ratio(grid, f, p);
  for (int s = 0; s < sweeps; ++s) {
    Field g = f.unaryExpr([p](double x) { return pow_abs(x, p - 2.0) * x; });
    g = solve_helmholtz(grid, g);
    const double nrm = h10_norm(grid, g);
    if (!(nrm > 0.0) || !std::isfinite(nrm)) break;
    f = g / nrm;
    const double r = sobolev_ratio(grid, f, p);
    if (r <= best * (1.0 + 1e-12)) {
      best = std::max(best, r);
      break;
    }
    best = r;
  }
  return best;
}

std::vector<Field> structured_trials(const Grid& grid) {
  std::vector<Field> out;
  const int n = grid.points_per_axis();
  const double L = grid.axis_length();
  out.push_back(Field::Ones(grid.size()));
  Field delta = Field::Zero(grid.size());
  delta(grid.size() / 2) = 1.0;
  out.push_back(delta);
  for (int k = 1; k <= std::min(n, 16); ++k) {
    Field f(grid.size());
    for (Eigen::Index p = 0; p < f.size(); ++p) {
      const auto x = grid.position(p);
      double v = 1.0;
      for (int a = 0; a < grid.dim(); ++a) v *= std::sin(k * std::numbers::pi * x[a] / L);
      f(p) = v;
    }
    out.push_back(f);
  }
  for (double width : {0.02, 0.05, 0.1, 0.2, 0.35}) {
    for (double centre : {0.5, 0.25}) {
      Field gauss(grid.size()), tent(grid.size());
      for (Eigen::Index p = 0; p < gauss.size(); ++p) {
        const auto x = grid.position(p);
        double r2 = 0.0, tmax = 0.0;
        for (int a = 0; a < grid.dim(); ++a) {
          const double d = x[a] - centre * L;
          r2 += d * d;
          tmax = std::max(tmax, std::abs(d));
        }
        gauss(p) = std::exp(-r2 / (2.0 * width * width * L * L));
        tent(p) = std::max(0.0, 1.0 - tmax / (width * L));
      }
      out.push_back(gauss);
      if (tent.cwiseAbs().maxCoeff() > 0.0) out.push_back(tent);
    }
  }
  return out;
}

// Step-potential gradient bound G for trajectories in the ball of radius r.
double gradient_bound(const FixedPointMap& map, const EmbeddingConstants& e, double r) {
  const PotentialModel& model = map.model();
  const auto& t = map.times();
  double gv = 0.0;
  if (model.external().family != "zero") {
    if (t.size() < 2) {
      gv = field_gradient_norm(model.grid(), model.external_at(t.front()), 3.0);
    } else {
      for (std::size_t n = 0; n + 1 < t.size(); ++n) {
        gv = std::max(gv, field_gradient_norm(model.grid(), model.external_at(0.5 * (t[n] + t[n + 1])), 3.0));
        if (model.external().is_static()) break;
      }
    }
  }
  const double rho3 = e.E1 * e.E1 * r * r;  // ||rho||_L3 <= E1^2 ||Psi||^2
  double g = gv;
  if (model.hartree_enabled()) g += model.hartree_kernel().gradient_l1_norm() * rho3;
  if (model.xc_enabled()) {
    const double T = map.window_length();
    if (map.phi_carry()) {
      g += field_gradient_norm(model.grid(), *map.phi_carry(), 3.0);
      g += model.xc().coupling() * model.xc().kernel().gradient_l1_norm() * T * rho3;
    } else {
      g += model.xc().coupling() * model.xc().kernel().gradient_l1_norm() * (1.0 + T) * rho3;
    }
  }
  return g;
}

Trajectory ball_sample(const FixedPointMap& map, double radius, Rng& rng) {
  std::uniform_real_distribution<double> frac(0.2, 1.0);
  return random_trajectory(map.psi0().grid(), map.psi0().n_orbitals(), map.times(), rng, radius * frac(rng));
}

}  // namespace

double sobolev_ratio(const Grid& grid, const Field& f, double p) {
  const double h1 = h10_norm(grid, f);
  if (!(h1 > 0.0)) return 0.0;
  return lp_norm(grid, f, p) / h1;
}

EmbeddingConstants embedding_constants(const Grid& grid, std::uint64_t seed, int trials, double safety) {
  Rng rng(seed);
  const std::array<double, 3> ps{6.0, 3.0, 4.0};
  std::array<double, 3> best{0.0, 0.0, 0.0};
  std::array<std::vector<std::pair<double, Field>>, 3> top;

  auto consider = [&](const Field& f) {
    for (int i = 0; i < 3; ++i) {
      const double r = sobolev_ratio(grid, f, ps[i]);
      best[i] = std::max(best[i], r);
      top[i].emplace_back(r, f);
      if (top[i].size() > 12) {
        std::sort(top[i].begin(), top[i].end(), [](const auto& a, const auto& b) { return a.first > b.first; });
        top[i].resize(6);
      }
    }
  };

  const auto structured = structured_trials(grid);
  for (const auto& f : structured) consider(f);
  std::uniform_int_distribution<int> pick_mode(1, 12);
  std::uniform_real_distribution<double> pick_decay(0.0, 3.0);
  for (int k = static_cast<int>(structured.size()); k < trials; ++k) {
    if (k % 4 == 3)
      consider(random_rough_field(grid, rng));
    else
      consider(random_smooth_field(grid, rng, pick_mode(rng), pick_decay(rng)));
  }
  for (int i = 0; i < 3; ++i) {
    std::sort(top[i].begin(), top[i].end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    const std::size_t starts = std::min<std::size_t>(top[i].size(), 4);
    for (std::size_t s = 0; s < starts; ++s) best[i] = std::max(best[i], refine_ratio(grid, top[i][s].second, ps[i], 60));
  }
  return {safety * best[0], safety * best[1], safety * best[2]};
}

double lemma_constant(const ConvolutionKernel& kernel, const EmbeddingConstants& e) {
  const double e1 = e.E1, e2 = e.E2, e3 = e.E3;
  return e1 * e1 * e1 * kernel.gradient_l1_norm() + e3 * e3 * kernel.l2_norm() + e2 * e2 * e1 * e1 * kernel.l1_norm();
}

RadiusInputs solution_radius(const OrbitalSet& psi0, const PotentialModel& model, double T,
                             const std::optional<Field>& phi_carry, double t0) {
  RadiusInputs out;
  Field phi = Field::Zero(model.grid().size());
  if (model.xc_enabled()) phi = phi_carry ? *phi_carry : model.xc().phi0(density(psi0));
  out.energy0 = energy(psi0, t0, phi, model).script;
  if (out.energy0 < 0.0) throw model_violation("initial energy functional is negative");
  const double charge = std::pow(norm(psi0, NormKind::L2), 2);
  double sup = 0.0;
  if (!model.external().is_static()) {
    const int samples = 200;
    for (int k = 0; k <= samples; ++k) {
      const double t = t0 + T * k / samples;
      const Field d = model.external().time_derivative(model.grid(), t);
      sup = std::max(sup, d.cwiseAbs().maxCoeff());
    }
    sup *= 1.1;
  }
  if (model.xc_enabled()) sup += model.xc().rate_sup_bound(charge);
  out.sup_dvdt = sup;
  const double m = model.mass(), hb = model.hbar();
  out.r0 = std::sqrt((4.0 * m / (hb * hb)) * (out.energy0 + 0.5 * T * sup * charge) + charge);
  return out;
}

std::pair<double, double> ball_radius(const OrbitalSet& psi0, const PotentialModel& model, double T, double U_bound,
                                      const std::optional<Field>& phi_carry, double t0) {
  const double r0 = solution_radius(psi0, model, T, phi_carry, t0).r0;
  return {r0, 2.0 * U_bound * std::max(norm(psi0, NormKind::H10), r0)};
}

double contraction_constant(double t, const ConstantsBundle& b) {
  const double factor = b.mode == "analytic" && b.step_growth < 1.0 ? 1.0 / (1.0 - b.step_growth) : 1.0;
  return b.C * t / b.hbar * b.U_bound * b.U_bound * b.psi0_h10 * factor;
}

namespace {

// Everything that does not depend on how the propagator is bounded.
ConstantsBundle base_constants(const FixedPointMap& map, const EmbeddingConstants& e) {
  const PotentialModel& model = map.model();
  ConstantsBundle b;
  b.hbar = model.hbar();
  b.embedding = e;
  b.window_length = map.window_length();
  b.dt = map.times().size() > 1 ? map.times()[1] - map.times()[0] : 0.0;
  b.psi0_h10 = norm(map.psi0(), NormKind::H10);
  b.psi0_l2 = norm(map.psi0(), NormKind::L2);
  const double T = b.window_length;

  if (model.hartree_enabled()) {
    const auto& w = model.hartree_kernel();
    b.hartree_l1 = w.l1_norm();
    b.hartree_l2 = w.l2_norm();
    b.hartree_grad_l1 = w.gradient_l1_norm();
    b.lemma_hartree = lemma_constant(w, e);
    const double vol = model.grid().volume();
    b.C0_displayed = e.E1 * e.E1 * (e.E1 * b.hartree_grad_l1 + std::pow(vol, 2.0 / 3.0) * b.hartree_l2 + e.E1 * e.E1 * vol);
  }
  if (model.xc_enabled()) {
    const double history = map.phi_carry() ? T : 1.0 + T;
    b.xc_increment = model.xc().coupling() * history * lemma_constant(model.xc().kernel(), e);
    b.C0_displayed += b.xc_increment;
    b.notes.push_back("xc increment taken from the history model's declared derivative bound");
  }
  b.C0 = b.lemma_hartree + b.xc_increment;

  const auto radius = solution_radius(map.psi0(), model, T, map.phi_carry(), map.times().front());
  b.energy0 = radius.energy0;
  b.sup_dvdt = radius.sup_dvdt;
  b.r0 = radius.r0;
  return b;
}

}  // namespace

ConstantsBundle analytic_constants(const FixedPointMap& map, const EmbeddingConstants& e) {
  const PotentialModel& model = map.model();
  ConstantsBundle b = base_constants(map, e);
  b.mode = "analytic";
  const double T = b.window_length;
  const int steps = static_cast<int>(map.times().size()) - 1;
  double U = 1.0;
  bool settled = false;
  for (int it = 0; it < 500; ++it) {
    const double r = 2.0 * U * std::max(b.psi0_h10, b.r0);
    const double G = gradient_bound(map, e, r);
    const double x = b.dt * e.E1 * G / (2.0 * model.hbar());
    if (!(x < 1.0)) throw window_too_long("propagator growth bound diverges: dt * E1 * G / (2 hbar) >= 1");
    const double U_new = std::pow((1.0 + x) / (1.0 - x), steps);
    b.r = r;
    b.potential_gradient_bound = G;
    b.step_growth = x;
    if (!std::isfinite(U_new) || U_new > 1e8) throw window_too_long("uniform propagator bound diverges; shrink the window");
    if (std::abs(U_new - U) <= 1e-13 * U_new) {
      U = U_new;
      settled = true;
      break;
    }
    U = U_new;
  }
  if (!settled) throw window_too_long("radius / propagator bound iteration did not settle; shrink the window");
  b.U_bound = U;
  b.r = 2.0 * U * std::max(b.psi0_h10, b.r0);
  b.C = 2.0 * b.r * b.C0;
  b.gamma_t = contraction_constant(T, b);
  b.q = b.gamma_t;
  return b;
}

double measure_contraction(const FixedPointMap& map, double radius, int pairs, Rng& rng) {
  double best = 0.0;
  std::uniform_real_distribution<double> small(1e-3, 1e-1);
  for (int k = 0; k < pairs; ++k) {
    const Trajectory a = ball_sample(map, radius, rng);
    Trajectory b = ball_sample(map, radius, rng);
    if (k % 2 == 1) {
      // Nearby pair: probes the derivative regime.
      b *= small(rng) * radius / std::max(sup_norm(b), 1e-300);
      b += a;
      const double m = sup_norm(b);
      if (m > radius) b *= radius / m;
    }
    const double den = sup_norm(a - b);
    if (!(den > 0.0)) continue;
    best = std::max(best, sup_norm(map(a) - map(b)) / den);
  }
  return best;
}

double measure_propagator_norm(const FixedPointMap& map, double radius, int samples, Rng& rng) {
  const Propagator& prop = map.propagator();
  const auto& t = map.times();
  double best = 1.0;
  for (int k = 0; k < samples; ++k) {
    const Trajectory a = ball_sample(map, radius, rng);
    const auto v = map.step_potentials(a);
    const std::size_t start = (t.size() - 1) * static_cast<std::size_t>(k % 3) / 3;
    OrbitalSet psi = random_state(map.psi0().grid(), map.psi0().n_orbitals(), rng, k % 2 == 0);
    const double n0 = norm(psi, NormKind::H10);
    for (std::size_t n = start; n + 1 < t.size(); ++n) {
      psi = prop.step(psi, v[n], t[n + 1] - t[n]);
      best = std::max(best, norm(psi, NormKind::H10) / n0);
    }
  }
  return best;
}

ConstantsBundle empirical_constants(const FixedPointMap& map, const EmbeddingConstants& e,
                                    const EmpiricalOptions& opts) {
  ConstantsBundle b = base_constants(map, e);
  b.mode = "empirical";
  b.notes.push_back("C, U_bound and gamma from sampled maxima times safety factor");
  Rng rng(opts.seed);
  // Propagator growth is sampled on the U = 1 ball, then the ball is widened by it.
  const double base_radius = 2.0 * std::max(b.psi0_h10, b.r0);
  b.U_bound = opts.safety * measure_propagator_norm(map, base_radius, std::max(opts.pairs / 2, 3), rng);
  const double radius = b.U_bound * base_radius;
  double cmax = 0.0;
  if (map.model().coupled()) {
    for (int k = 0; k < 3 * opts.pairs; ++k) {
      const Trajectory a = ball_sample(map, radius, rng);
      const Trajectory c = ball_sample(map, radius, rng);
      const OrbitalSet psi = random_state(map.psi0().grid(), map.psi0().n_orbitals(), rng, k % 2 == 0);
      cmax = std::max(cmax, potential_lipschitz_ratio(a, c, psi, map));
    }
  }
  b.C = opts.safety * cmax;
  b.r = radius;
  b.C0 = b.r > 0.0 ? b.C / (2.0 * b.r) : 0.0;
  b.step_growth = 0.0;
  b.gamma_t = contraction_constant(b.window_length, b);
  b.q = b.gamma_t;
  b.gamma_measured = map.model().coupled() ? measure_contraction(map, radius, opts.pairs, rng) : 0.0;
  return b;
}

PicardResult picard_solve(const FixedPointMap& map, const PicardOptions& opts) {
  if (!(opts.target_residual > 0.0)) throw configuration_error("Picard target residual must be positive");
  PicardResult out;
  out.trace.solver = "picard";
  out.trace.floor = opts.target_residual;
  Trajectory current = opts.seed ? *opts.seed : map.zero_charge();
  if (opts.keep_iterates) out.iterates.push_back(current);
  std::optional<Trajectory> previous;
  double first_residual = -1.0;
  for (int k = 0; k < opts.max_iters; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Trajectory next = map(current);
    IterationRecord rec;
    rec.iter = k;
    rec.residual = sup_norm(current - next);
    if (previous) rec.step_norm = sup_norm(current - *previous);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.trace.records.push_back(rec);
    if (first_residual < 0.0) {
      first_residual = rec.residual;
      if (opts.q > 0.0 && opts.q < 1.0 && rec.residual > opts.target_residual)
        out.predicted_iterations =
            1 + static_cast<int>(std::ceil(std::log(opts.target_residual / rec.residual) / std::log(opts.q)));
      else if (rec.residual <= opts.target_residual)
        out.predicted_iterations = 1;
    }
    if (rec.residual <= opts.target_residual) {
      out.trace.converged = true;
      out.solution = std::move(current);
      return out;
    }
    previous = std::move(current);
    current = std::move(next);
    if (opts.keep_iterates) out.iterates.push_back(current);
  }
  throw nonconvergence_error("Picard iteration did not reach the target residual", out.trace);
}

int window_count(double gamma_T, double cap, int steps, int min_windows) {
  if (!(cap > 0.0) || !(cap < 1.0)) throw configuration_error("per-window gamma cap must lie in (0, 1)");
  if (steps < 1) throw configuration_error("continuation needs at least one step");
  const int need = std::max(min_windows, static_cast<int>(std::ceil(gamma_T / cap - 1e-12)));
  for (int w = std::max(need, 1); w <= steps; ++w)
    if (steps % w == 0) return w;
  throw window_too_long("no window partition of the step count meets the gamma cap");
}

ContinuationResult continue_in_time(const OrbitalSet& psi0, const PotentialModel& model, const Propagator& propagator,
                                    double t0, double T, int steps, int windows, const WindowSolver& solver) {
  if (windows < 1 || steps % windows != 0) throw configuration_error("window count must divide the step count");
  ContinuationResult out;
  out.windows = windows;
  const int per = steps / windows;
  const double span = T / windows;
  OrbitalSet state = psi0;
  std::optional<Field> carry;
  std::vector<double> times;
  std::vector<OrbitalSet> states;
  for (int w = 0; w < windows; ++w) {
    const double a = t0 + span * w;
    const double b = w + 1 == windows ? t0 + T : t0 + span * (w + 1);
    FixedPointMap map(model, propagator, state, uniform_knots(a, b, per), carry);
    auto [traj, trace] = solver(map);
    out.traces.push_back(std::move(trace));
    for (std::size_t k = (w == 0 ? 0 : 1); k < traj.knots(); ++k) {
      times.push_back(traj.times()[k]);
      states.push_back(traj[k]);
    }
    carry = map.phi_end(traj);
    state = traj.back();
  }
  out.solution = Trajectory(std::move(times), std::move(states));
  return out;
}

}  // namespace tdks

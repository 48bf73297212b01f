#include "tdks/evolution.hpp"

#include <cmath>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "sparse_ops.hpp"
#include "tdks/errors.hpp"

namespace tdks {

std::vector<double> PropagatorConfig::knots(double t0, double t1) const {
  if (!(dt > 0.0)) throw configuration_error("propagator dt must be positive");
  if (t1 < t0) throw configuration_error("window end precedes window start");
  const double ratio = (t1 - t0) / dt;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-12 * std::max(1.0, ratio))
    throw configuration_error("dt does not divide the window length");
  return uniform_knots(t0, t1, static_cast<int>(steps));
}

StepSource StepSource::from_knots(const Trajectory& f) {
  StepSource s;
  for (std::size_t n = 0; n + 1 < f.knots(); ++n) {
    s.left.push_back(f[n]);
    s.right.push_back(f[n + 1]);
  }
  return s;
}

struct Propagator::SparseCache {
  Eigen::SparseMatrix<cplx> laplacian;
};

Propagator::Propagator(Grid grid, double kinetic_coefficient, double hbar, PropagatorConfig cfg)
    : grid_(grid), kinetic_(kinetic_coefficient), hbar_(hbar), cfg_(cfg) {
  if (!(hbar > 0.0)) throw configuration_error("hbar must be positive");
  if (!(kinetic_coefficient >= 0.0)) throw configuration_error("kinetic coefficient must be nonnegative");
  if (!(cfg.linear_solve_tol > 0.0) || cfg.max_linear_iters < 1)
    throw configuration_error("linear solver settings out of range");
  if (grid.dim() != 1) {
    auto cache = std::make_shared<SparseCache>();
    cache->laplacian = detail::sparse_laplacian(grid).cast<cplx>();
    sparse_ = std::move(cache);
  }
}

Propagator Propagator::for_model(const PotentialModel& model, PropagatorConfig cfg) {
  return Propagator(model.grid(), model.kinetic_coefficient(), model.hbar(), cfg);
}

Eigen::MatrixXcd Propagator::cayley_1d(const Eigen::MatrixXcd& x, const Field& v, double tau,
                                       const Eigen::MatrixXcd* extra) const {
  const Eigen::Index n = x.rows();
  const double kh = kinetic_ / (grid_.spacing() * grid_.spacing());
  const cplx itau(0.0, tau);
  const cplx off = -itau * kh;

  // Factor the tridiagonal I + i tau H once; reuse for all orbitals.
  Eigen::VectorXcd cprime(n), inv_pivot(n);
  cplx pivot = 1.0 + itau * (2.0 * kh + v(0));
  inv_pivot(0) = 1.0 / pivot;
  cprime(0) = off * inv_pivot(0);
  for (Eigen::Index i = 1; i < n; ++i) {
    pivot = 1.0 + itau * (2.0 * kh + v(i)) - off * cprime(i - 1);
    inv_pivot(i) = 1.0 / pivot;
    cprime(i) = off * inv_pivot(i);
  }

  Eigen::MatrixXcd out(n, x.cols());
#pragma omp parallel for if (x.cols() > 1)
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::VectorXcd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const cplx left = i > 0 ? x(i - 1, j) : cplx(0.0);
      const cplx right = i < n - 1 ? x(i + 1, j) : cplx(0.0);
      const cplx hx = kh * (2.0 * x(i, j) - left - right) + v(i) * x(i, j);
      cplx r = x(i, j) - itau * hx;
      if (extra) r += (*extra)(i, j);
      y(i) = (i > 0 ? r - off * y(i - 1) : r) * inv_pivot(i);
    }
    out(n - 1, j) = y(n - 1);
    for (Eigen::Index i = n - 2; i >= 0; --i) out(i, j) = y(i) - cprime(i) * out(i + 1, j);
  }
  return out;
}

Eigen::MatrixXcd Propagator::cayley_sparse(const Eigen::MatrixXcd& x, const Field& v, double tau,
                                           const Eigen::MatrixXcd* extra) const {
  const cplx itau(0.0, tau);
  Eigen::SparseMatrix<cplx> h = -kinetic_ * sparse_->laplacian;
  for (Eigen::Index p = 0; p < h.rows(); ++p) h.coeffRef(p, p) += v(p);
  Eigen::SparseMatrix<cplx> a = itau * h;
  Eigen::SparseMatrix<cplx> b = -itau * h;
  for (Eigen::Index p = 0; p < h.rows(); ++p) {
    a.coeffRef(p, p) += 1.0;
    b.coeffRef(p, p) += 1.0;
  }
  Eigen::BiCGSTAB<Eigen::SparseMatrix<cplx>> solver;
  solver.setTolerance(cfg_.linear_solve_tol);
  solver.setMaxIterations(cfg_.max_linear_iters);
  solver.compute(a);
  Eigen::MatrixXcd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    Eigen::VectorXcd rhs = b * x.col(j);
    if (extra) rhs += extra->col(j);
    if (rhs.squaredNorm() == 0.0) {
      out.col(j).setZero();
      continue;
    }
    out.col(j) = solver.solveWithGuess(rhs, x.col(j));
    if (solver.info() != Eigen::Success)
      throw solver_error("Crank-Nicolson step: BiCGSTAB did not reach tolerance", solver.error());
  }
  return out;
}

Eigen::MatrixXcd Propagator::cayley(const Eigen::MatrixXcd& x, const Field& v, double dt,
                                    const Eigen::MatrixXcd* extra) const {
  if (v.size() != grid_.size()) throw structural_error("step potential does not match grid");
  const double tau = dt / (2.0 * hbar_);
  if (grid_.dim() == 1) return cayley_1d(x, v, tau, extra);
  return cayley_sparse(x, v, tau, extra);
}

OrbitalSet Propagator::step(const OrbitalSet& state, const Field& v_half, double dt) const {
  require_same_grid(grid_, state.grid(), "step");
  if (dt == 0.0) return state;
  return OrbitalSet(grid_, cayley(state.values(), v_half, dt, nullptr));
}

Trajectory Propagator::propagate(const OrbitalSet& psi0, const std::vector<double>& times,
                                 const std::vector<Field>& v_half) const {
  require_same_grid(grid_, psi0.grid(), "propagate");
  if (times.empty()) throw structural_error("propagate: no knots");
  if (v_half.size() + 1 != times.size()) throw structural_error("propagate: one potential per step required");
  std::vector<OrbitalSet> states;
  states.reserve(times.size());
  states.push_back(psi0);
  for (std::size_t n = 0; n + 1 < times.size(); ++n)
    states.push_back(step(states.back(), v_half[n], times[n + 1] - times[n]));
  return Trajectory(times, std::move(states));
}

Trajectory Propagator::propagate(const OrbitalSet& psi0, const PotentialModel& model, const DensityPath& path) const {
  return propagate(psi0, path.times, model.step_potentials(path));
}

Trajectory Propagator::propagate_inhomogeneous(const StepSource& source, const std::vector<double>& times,
                                               const std::vector<Field>& v_half) const {
  if (times.empty()) throw structural_error("propagate_inhomogeneous: no knots");
  const std::size_t steps = times.size() - 1;
  if (v_half.size() != steps || source.left.size() != steps || source.right.size() != steps)
    throw structural_error("propagate_inhomogeneous: source/potential count does not match steps");
  if (steps == 0) throw structural_error("propagate_inhomogeneous: need at least one step to fix orbital count");
  const int n_orb = source.left.front().n_orbitals();
  std::vector<OrbitalSet> states;
  states.reserve(times.size());
  states.emplace_back(grid_, n_orb);
  for (std::size_t n = 0; n < steps; ++n) {
    const double dt = times[n + 1] - times[n];
    const cplx w(0.0, -dt / (2.0 * hbar_));
    require_same_grid(grid_, source.left[n].grid(), "propagate_inhomogeneous");
    const Eigen::MatrixXcd extra = w * (source.left[n].values() + source.right[n].values());
    states.emplace_back(grid_, cayley(states.back().values(), v_half[n], dt, &extra));
  }
  return Trajectory(times, std::move(states));
}

Trajectory Propagator::propagate_inhomogeneous(const Trajectory& source, const std::vector<Field>& v_half) const {
  return propagate_inhomogeneous(StepSource::from_knots(source), source.times(), v_half);
}

Trajectory Propagator::propagate_inhomogeneous(const Trajectory& source, const PotentialModel& model,
                                               const DensityPath& path) const {
  return propagate_inhomogeneous(source, model.step_potentials(path));
}

// ---------------------------------------------------------------------------

FixedPointMap::FixedPointMap(const PotentialModel& model, Propagator propagator, OrbitalSet psi0,
                             std::vector<double> times, std::optional<Field> phi_carry)
    : model_(&model),
      propagator_(std::move(propagator)),
      psi0_(std::move(psi0)),
      times_(std::move(times)),
      phi_carry_(std::move(phi_carry)) {
  require_same_grid(model.grid(), psi0_.grid(), "fixed-point map");
  require_same_grid(model.grid(), propagator_.grid(), "fixed-point map");
  if (times_.empty()) throw structural_error("fixed-point map: no knots");
  // Validates uniformity of the knots.
  (void)Trajectory::constant(psi0_, times_);
}

void FixedPointMap::check_input(const Trajectory& input) const {
  if (input.knots() != times_.size()) throw structural_error("fixed-point map: input knot count mismatch");
  require_same_grid(input.grid(), psi0_.grid(), "fixed-point map input");
}

DensityPath FixedPointMap::density_path(const Trajectory& input) const {
  check_input(input);
  return DensityPath::from_trajectory(input, phi_carry_);
}

std::vector<Field> FixedPointMap::step_potentials(const Trajectory& input) const {
  return model_->step_potentials(density_path(input));
}

Trajectory FixedPointMap::operator()(const Trajectory& input) const {
  return propagator_.propagate(psi0_, times_, step_potentials(input));
}

Trajectory FixedPointMap::zero_charge() const {
  const DensityPath zero = DensityPath::zeros(psi0_.grid(), times_, phi_carry_);
  return propagator_.propagate(psi0_, times_, model_->step_potentials(zero));
}

std::optional<Field> FixedPointMap::phi_end(const Trajectory& solution) const {
  if (!model_->xc_enabled()) return std::nullopt;
  return model_->xc_phi_knots(density_path(solution)).back();
}

}  // namespace tdks

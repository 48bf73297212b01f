#include "tdks/discrete_space.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "sparse_ops.hpp"
#include "tdks/errors.hpp"

namespace tdks {

namespace {

inline int axis_index(Eigen::Index p, Eigen::Index stride, int n) {
  return static_cast<int>((p / stride) % n);
}

// Thomas algorithm for the constant-coefficient tridiagonal (I - Lap) in 1D.
Field helmholtz_1d(const Grid& grid, const Field& f) {
  const Eigen::Index n = f.size();
  const double inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
  const double diag = 1.0 + 2.0 * inv_h2;
  const double off = -inv_h2;
  Eigen::VectorXd c(n), d(n);
  c(0) = off / diag;
  d(0) = f(0) / diag;
  for (Eigen::Index i = 1; i < n; ++i) {
    const double m = diag - off * c(i - 1);
    c(i) = off / m;
    d(i) = (f(i) - off * d(i - 1)) / m;
  }
  Field x(n);
  x(n - 1) = d(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) x(i) = d(i) - c(i) * x(i + 1);
  return x;
}

}  // namespace

Grid::Grid(int dim, int points_per_axis, double axis_length)
    : dim_(dim), n_(points_per_axis), length_(axis_length) {
  if (dim != 1 && dim != 3) throw configuration_error("grid dimension must be 1 or 3");
  if (points_per_axis < 2) throw configuration_error("grid needs at least 2 points per axis");
  if (!(axis_length > 0.0) || !std::isfinite(axis_length))
    throw configuration_error("grid axis length must be positive");
}

Eigen::Index Grid::size() const noexcept {
  Eigen::Index s = 1;
  for (int a = 0; a < dim_; ++a) s *= n_;
  return s;
}

double Grid::cell_volume() const noexcept { return std::pow(spacing(), dim_); }

double Grid::volume() const noexcept { return std::pow(length_, dim_); }

double Grid::diameter() const noexcept { return length_ * std::sqrt(static_cast<double>(dim_)); }

Eigen::Index Grid::stride(int axis) const noexcept {
  Eigen::Index s = 1;
  for (int a = 0; a < axis; ++a) s *= n_;
  return s;
}

std::array<int, 3> Grid::multi_index(Eigen::Index flat) const noexcept {
  std::array<int, 3> idx{0, 0, 0};
  for (int a = 0; a < dim_; ++a) {
    idx[a] = static_cast<int>(flat % n_);
    flat /= n_;
  }
  return idx;
}

std::array<double, 3> Grid::position(Eigen::Index flat) const noexcept {
  const auto idx = multi_index(flat);
  std::array<double, 3> x{0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) x[a] = coordinate(idx[a]);
  return x;
}

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (!(a == b)) {
    std::ostringstream msg;
    msg << where << ": grid mismatch (" << a.dim() << "D/" << a.points_per_axis() << "/"
        << a.axis_length() << " vs " << b.dim() << "D/" << b.points_per_axis() << "/"
        << b.axis_length() << ")";
    throw structural_error(msg.str());
  }
}

// ---------------------------------------------------------------------------

OrbitalSet::OrbitalSet(Grid grid, int n_orbitals)
    : grid_(grid), values_(Eigen::MatrixXcd::Zero(grid.size(), n_orbitals)) {
  if (n_orbitals < 1) throw configuration_error("orbital set needs at least one orbital");
}

OrbitalSet::OrbitalSet(Grid grid, Eigen::MatrixXcd values) : grid_(grid), values_(std::move(values)) {
  if (values_.rows() != grid_.size())
    throw structural_error("orbital values do not match the number of grid points");
  if (values_.cols() < 1) throw structural_error("orbital set needs at least one orbital");
  if (!is_finite()) throw structural_error("orbital values must be finite");
}

bool OrbitalSet::is_finite() const { return values_.allFinite(); }

void OrbitalSet::check_compatible(const OrbitalSet& other) const {
  require_same_grid(grid_, other.grid_, "orbital arithmetic");
  if (values_.cols() != other.values_.cols())
    throw structural_error("orbital arithmetic: orbital count mismatch");
}

OrbitalSet& OrbitalSet::operator+=(const OrbitalSet& other) {
  check_compatible(other);
  values_ += other.values_;
  return *this;
}

OrbitalSet& OrbitalSet::operator-=(const OrbitalSet& other) {
  check_compatible(other);
  values_ -= other.values_;
  return *this;
}

OrbitalSet& OrbitalSet::operator*=(cplx s) {
  values_ *= s;
  return *this;
}

DensityField::DensityField(Grid grid, Field values) : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) throw structural_error("density size does not match grid");
  if (!values_.allFinite() || (values_.size() > 0 && values_.minCoeff() < 0.0))
    throw model_violation("density must be finite and nonnegative");
}

// ---------------------------------------------------------------------------

Trajectory::Trajectory(std::vector<double> times, std::vector<OrbitalSet> states)
    : times_(std::move(times)), states_(std::move(states)) {
  if (times_.size() != states_.size())
    throw structural_error("trajectory: knot count does not match state count");
  if (states_.empty()) return;
  for (std::size_t k = 1; k < states_.size(); ++k) {
    require_same_grid(states_[0].grid(), states_[k].grid(), "trajectory");
    if (states_[k].n_orbitals() != states_[0].n_orbitals())
      throw structural_error("trajectory: orbital count changes along the path");
    if (!(times_[k] > times_[k - 1])) throw structural_error("trajectory: knots must increase");
  }
  if (times_.size() > 2) {
    const double span = times_.back() - times_.front();
    const double dt = span / static_cast<double>(times_.size() - 1);
    for (std::size_t k = 0; k < times_.size(); ++k) {
      const double expected = times_.front() + dt * static_cast<double>(k);
      if (std::abs(times_[k] - expected) > 1e-12 * std::max(1.0, std::abs(span)))
        throw structural_error("trajectory: knots are not uniform");
    }
  }
}

Trajectory Trajectory::constant(const OrbitalSet& state, std::vector<double> times) {
  std::vector<OrbitalSet> states(times.size(), state);
  return Trajectory(std::move(times), std::move(states));
}

Trajectory Trajectory::zeros_like(const Trajectory& shape) {
  return constant(OrbitalSet(shape.grid(), shape.n_orbitals()), shape.times());
}

double Trajectory::dt() const {
  if (times_.size() < 2) return 0.0;
  return (times_.back() - times_.front()) / static_cast<double>(times_.size() - 1);
}

void Trajectory::check_compatible(const Trajectory& other) const {
  if (states_.size() != other.states_.size())
    throw structural_error("trajectory arithmetic: knot count mismatch");
  for (std::size_t k = 0; k < times_.size(); ++k)
    if (std::abs(times_[k] - other.times_[k]) > 1e-12 * std::max(1.0, std::abs(times_[k])))
      throw structural_error("trajectory arithmetic: knots differ");
}

Trajectory& Trajectory::operator+=(const Trajectory& other) {
  check_compatible(other);
  for (std::size_t k = 0; k < states_.size(); ++k) states_[k] += other.states_[k];
  return *this;
}

Trajectory& Trajectory::operator-=(const Trajectory& other) {
  check_compatible(other);
  for (std::size_t k = 0; k < states_.size(); ++k) states_[k] -= other.states_[k];
  return *this;
}

Trajectory& Trajectory::operator*=(double s) {
  for (auto& st : states_) st *= cplx(s, 0.0);
  return *this;
}

std::vector<double> uniform_knots(double t0, double t1, int steps) {
  if (steps < 0) throw configuration_error("negative step count");
  std::vector<double> t(static_cast<std::size_t>(steps) + 1);
  if (steps == 0) {
    t[0] = t0;
    return t;
  }
  const double dt = (t1 - t0) / steps;
  for (int k = 0; k <= steps; ++k) t[k] = t0 + dt * k;
  t.back() = t1;
  return t;
}

// ---------------------------------------------------------------------------

cplx inner(const OrbitalSet& a, const OrbitalSet& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  if (a.n_orbitals() != b.n_orbitals()) throw structural_error("inner: orbital count mismatch");
  cplx s = 0.0;
  for (int j = 0; j < a.n_orbitals(); ++j) s += b.values().col(j).dot(a.values().col(j));
  return s * a.grid().cell_volume();
}

double gradient_norm_squared(const OrbitalSet& state) {
  const Grid& g = state.grid();
  const int n = g.points_per_axis();
  const double h = g.spacing();
  const auto& v = state.values();
  double s = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const Eigen::Index st = g.stride(a);
    for (int j = 0; j < state.n_orbitals(); ++j) {
      for (Eigen::Index p = 0; p < v.rows(); ++p) {
        const int i = axis_index(p, st, n);
        if (i == 0) s += std::norm(v(p, j));
        if (i < n - 1)
          s += std::norm(v(p + st, j) - v(p, j));
        else
          s += std::norm(v(p, j));
      }
    }
  }
  return s * g.cell_volume() / (h * h);
}

double norm(const OrbitalSet& state, NormKind which) {
  const double l2sq = std::max(0.0, inner(state, state).real());
  switch (which) {
    case NormKind::L2:
      return std::sqrt(l2sq);
    case NormKind::H10:
      return std::sqrt(l2sq + gradient_norm_squared(state));
    case NormKind::Hm1: {
      const Grid& g = state.grid();
      double s = 0.0;
      for (int j = 0; j < state.n_orbitals(); ++j) {
        const Field re = state.values().col(j).real();
        const Field im = state.values().col(j).imag();
        s += re.dot(solve_helmholtz(g, re)) + im.dot(solve_helmholtz(g, im));
      }
      return std::sqrt(std::max(0.0, s * g.cell_volume()));
    }
  }
  return 0.0;
}

double sup_norm(const Trajectory& traj) {
  if (traj.empty()) throw structural_error("sup_norm: empty trajectory");
  double m = 0.0;
  for (const auto& s : traj.states()) m = std::max(m, norm(s, NormKind::H10));
  return m;
}

OrbitalSet laplacian(const OrbitalSet& state) {
  Eigen::MatrixXcd out(state.values().rows(), state.values().cols());
  for (int j = 0; j < state.n_orbitals(); ++j) {
    const Field re = state.values().col(j).real();
    const Field im = state.values().col(j).imag();
    const Field lr = laplacian(state.grid(), re);
    const Field li = laplacian(state.grid(), im);
    for (Eigen::Index p = 0; p < out.rows(); ++p) out(p, j) = cplx(lr(p), li(p));
  }
  return OrbitalSet(state.grid(), std::move(out));
}

Field laplacian(const Grid& g, const Field& f) {
  if (f.size() != g.size()) throw structural_error("laplacian: field size does not match grid");
  const int n = g.points_per_axis();
  const double inv_h2 = 1.0 / (g.spacing() * g.spacing());
  Field out = Field::Zero(f.size());
  for (int a = 0; a < g.dim(); ++a) {
    const Eigen::Index st = g.stride(a);
    for (Eigen::Index p = 0; p < f.size(); ++p) {
      const int i = axis_index(p, st, n);
      const double left = i > 0 ? f(p - st) : 0.0;
      const double right = i < n - 1 ? f(p + st) : 0.0;
      out(p) += (left - 2.0 * f(p) + right) * inv_h2;
    }
  }
  return out;
}

Field solve_helmholtz(const Grid& g, const Field& f) {
  if (f.size() != g.size()) throw structural_error("helmholtz: field size does not match grid");
  if (g.dim() == 1) return helmholtz_1d(g, f);
  Eigen::SparseMatrix<double> a = -detail::sparse_laplacian(g);
  for (Eigen::Index p = 0; p < a.rows(); ++p) a.coeffRef(p, p) += 1.0;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
  cg.setTolerance(1e-14);
  cg.setMaxIterations(10 * static_cast<int>(g.size()));
  cg.compute(a);
  Field x = cg.solve(f);
  if (cg.info() != Eigen::Success) throw solver_error("helmholtz: CG did not converge", cg.error());
  return x;
}

Field density(const OrbitalSet& state) { return state.values().cwiseAbs2().rowwise().sum(); }

Field pair_density(const OrbitalSet& a, const OrbitalSet& b) {
  require_same_grid(a.grid(), b.grid(), "pair_density");
  if (a.n_orbitals() != b.n_orbitals()) throw structural_error("pair_density: orbital count mismatch");
  return (a.values().conjugate().cwiseProduct(b.values())).real().rowwise().sum();
}

Field modulus(const OrbitalSet& state) { return density(state).cwiseSqrt(); }

OrbitalSet multiply(const Field& w, const OrbitalSet& state) {
  if (w.size() != state.grid().size()) throw structural_error("multiply: field size does not match grid");
  Eigen::MatrixXcd out = state.values();
  for (int j = 0; j < state.n_orbitals(); ++j) out.col(j) = out.col(j).cwiseProduct(w.cast<cplx>());
  return OrbitalSet(state.grid(), std::move(out));
}

double lp_norm(const Grid& g, const Field& f, double p) {
  if (f.size() != g.size()) throw structural_error("lp_norm: field size does not match grid");
  if (std::isinf(p)) return f.size() ? f.cwiseAbs().maxCoeff() : 0.0;
  const double s = f.cwiseAbs().array().pow(p).sum() * g.cell_volume();
  return std::pow(s, 1.0 / p);
}

double lp_norm(const OrbitalSet& state, double p) { return lp_norm(state.grid(), modulus(state), p); }

double field_gradient_norm(const Grid& g, const Field& f, double p) {
  if (f.size() != g.size()) throw structural_error("field_gradient_norm: size mismatch");
  const int n = g.points_per_axis();
  const double h = g.spacing();
  double total = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    const Eigen::Index st = g.stride(a);
    double acc = std::isinf(p) ? 0.0 : 0.0;
    for (Eigen::Index q = 0; q < f.size(); ++q) {
      if (axis_index(q, st, n) == n - 1) continue;
      const double d = std::abs(f(q + st) - f(q)) / h;
      if (std::isinf(p))
        acc = std::max(acc, d);
      else
        acc += std::pow(d, p);
    }
    const double axis_norm = std::isinf(p) ? acc : std::pow(acc * g.cell_volume(), 1.0 / p);
    total += axis_norm * axis_norm;
  }
  return std::sqrt(total);
}

double h10_norm(const Grid& g, const Field& f) {
  return norm(OrbitalSet(g, Eigen::MatrixXcd(f.cast<cplx>())), NormKind::H10);
}

}  // namespace tdks

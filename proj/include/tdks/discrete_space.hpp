#pragma once

// Uniform interior-point Dirichlet grids, orbital sets, trajectories and the
// discrete Sobolev norms every other module states its contracts in.
//
// Functions are stored on interior points only; the boundary trace is zero by
// construction. Quadrature is the rectangle rule h^dim * sum. Gradients live on
// grid edges: for Dirichlet states every edge (including the two boundary edges
// per line, with ghost zeros) contributes, so that ||D f||^2 = -<Lap f, f>
// exactly. Fields that are not Dirichlet (potentials) use interior edges only.

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace tdks {

using cplx = std::complex<double>;
using Field = Eigen::VectorXd;

class Grid {
 public:
  Grid() : Grid(1, 2, 1.0) {}
  Grid(int dim, int points_per_axis, double axis_length);

  int dim() const noexcept { return dim_; }
  int points_per_axis() const noexcept { return n_; }
  double axis_length() const noexcept { return length_; }
  double spacing() const noexcept { return length_ / (n_ + 1); }
  Eigen::Index size() const noexcept;
  double cell_volume() const noexcept;
  /// |Omega|
  double volume() const noexcept;
  double diameter() const noexcept;
  double coordinate(int i) const noexcept { return (i + 1) * spacing(); }
  Eigen::Index stride(int axis) const noexcept;
  std::array<int, 3> multi_index(Eigen::Index flat) const noexcept;
  std::array<double, 3> position(Eigen::Index flat) const noexcept;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int dim_;
  int n_;
  double length_;
};

void require_same_grid(const Grid& a, const Grid& b, const char* where);

/// N complex orbitals sampled on the interior points of a grid, one column per orbital.
class OrbitalSet {
 public:
  OrbitalSet() = default;
  OrbitalSet(Grid grid, int n_orbitals);
  OrbitalSet(Grid grid, Eigen::MatrixXcd values);

  const Grid& grid() const noexcept { return grid_; }
  int n_orbitals() const noexcept { return static_cast<int>(values_.cols()); }
  const Eigen::MatrixXcd& values() const noexcept { return values_; }
  Eigen::MatrixXcd& values() noexcept { return values_; }
  bool is_finite() const;

  OrbitalSet& operator+=(const OrbitalSet& other);
  OrbitalSet& operator-=(const OrbitalSet& other);
  OrbitalSet& operator*=(cplx s);

  friend OrbitalSet operator+(OrbitalSet a, const OrbitalSet& b) { return a += b; }
  friend OrbitalSet operator-(OrbitalSet a, const OrbitalSet& b) { return a -= b; }
  friend OrbitalSet operator*(cplx s, OrbitalSet a) { return a *= s; }

 private:
  void check_compatible(const OrbitalSet& other) const;

  Grid grid_;
  Eigen::MatrixXcd values_;
};

/// Nonnegative real density on a grid.
class DensityField {
 public:
  DensityField(Grid grid, Field values);
  const Grid& grid() const noexcept { return grid_; }
  const Field& values() const noexcept { return values_; }

 private:
  Grid grid_;
  Field values_;
};

/// Time-knotted path of orbital sets on uniform knots.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(std::vector<double> times, std::vector<OrbitalSet> states);
  static Trajectory constant(const OrbitalSet& state, std::vector<double> times);
  static Trajectory zeros_like(const Trajectory& shape);

  const Grid& grid() const { return states_.front().grid(); }
  int n_orbitals() const { return states_.front().n_orbitals(); }
  std::size_t knots() const noexcept { return states_.size(); }
  std::size_t steps() const noexcept { return states_.empty() ? 0 : states_.size() - 1; }
  const std::vector<double>& times() const noexcept { return times_; }
  double dt() const;
  bool empty() const noexcept { return states_.empty(); }

  const OrbitalSet& operator[](std::size_t k) const { return states_[k]; }
  OrbitalSet& operator[](std::size_t k) { return states_[k]; }
  const OrbitalSet& front() const { return states_.front(); }
  const OrbitalSet& back() const { return states_.back(); }
  const std::vector<OrbitalSet>& states() const noexcept { return states_; }

  Trajectory& operator+=(const Trajectory& other);
  Trajectory& operator-=(const Trajectory& other);
  Trajectory& operator*=(double s);
  friend Trajectory operator+(Trajectory a, const Trajectory& b) { return a += b; }
  friend Trajectory operator-(Trajectory a, const Trajectory& b) { return a -= b; }
  friend Trajectory operator*(double s, Trajectory a) { return a *= s; }

 private:
  void check_compatible(const Trajectory& other) const;

  std::vector<double> times_;
  std::vector<OrbitalSet> states_;
};

/// steps+1 equally spaced knots on [t0, t1].
std::vector<double> uniform_knots(double t0, double t1, int steps);

enum class NormKind { L2, H10, Hm1 };

/// (a, b)_{L2} = sum_j h^d sum_x a_j conj(b_j).
cplx inner(const OrbitalSet& a, const OrbitalSet& b);
double norm(const OrbitalSet& state, NormKind which);
/// sum_j ||grad psi_j||^2 over all Dirichlet edges.
double gradient_norm_squared(const OrbitalSet& state);
/// max over knots of the H10 norm.
double sup_norm(const Trajectory& traj);

OrbitalSet laplacian(const OrbitalSet& state);
Field laplacian(const Grid& grid, const Field& f);
/// (I - Lap)^{-1} f with homogeneous Dirichlet closure.
Field solve_helmholtz(const Grid& grid, const Field& f);

Field density(const OrbitalSet& state);
/// Re sum_j conj(a_j) b_j, the pointwise density pairing.
Field pair_density(const OrbitalSet& a, const OrbitalSet& b);
/// |Psi| = sqrt(sum_j |psi_j|^2) pointwise.
Field modulus(const OrbitalSet& state);
OrbitalSet multiply(const Field& w, const OrbitalSet& state);

/// (h^d sum |f|^p)^{1/p}; p = infinity gives the max norm.
double lp_norm(const Grid& grid, const Field& f, double p);
double lp_norm(const OrbitalSet& state, double p);
/// (sum_a ||D_a f||_p^2)^{1/2} over interior edges (no boundary closure).
double field_gradient_norm(const Grid& grid, const Field& f, double p);
/// H10 norm of a real Dirichlet field.
double h10_norm(const Grid& grid, const Field& f);

}  // namespace tdks

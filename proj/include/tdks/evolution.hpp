#pragma once

// Crank-Nicolson realization of the time-ordered propagator U(t, s), the
// fixed-point map K and inhomogeneous (Duhamel) propagation.
//
// One step solves (I + i tau H) psi+ = (I - i tau H) psi with tau = dt / (2 hbar)
// and H = -k Lap + v_half, k = hbar^2 / 2m. The inhomogeneous variant solves
// i hbar eta_t = H eta + f with trapezoidal source weights, so that
// (I + i tau H) eta+ = (I - i tau H) eta - i tau (f_left + f_right).

#include <memory>
#include <optional>
#include <vector>

#include "tdks/discrete_space.hpp"
#include "tdks/potentials.hpp"

namespace tdks {

struct PropagatorConfig {
  /// Knot spacing; 0 lets the knot vector decide.
  double dt = 0.0;
  /// Relative residual target for the iterative (3D) solves.
  double linear_solve_tol = 1e-13;
  int max_linear_iters = 2000;

  /// Uniform knots on [t0, t1] with spacing dt; dt must divide the window.
  std::vector<double> knots(double t0, double t1) const;
};

/// Source samples per step: left[n] at t_n and right[n] at t_{n+1}.
struct StepSource {
  std::vector<OrbitalSet> left;
  std::vector<OrbitalSet> right;

  static StepSource from_knots(const Trajectory& f);
};

class Propagator {
 public:
  Propagator(Grid grid, double kinetic_coefficient, double hbar, PropagatorConfig cfg = {});
  static Propagator for_model(const PotentialModel& model, PropagatorConfig cfg = {});

  const Grid& grid() const noexcept { return grid_; }
  double hbar() const noexcept { return hbar_; }
  double kinetic_coefficient() const noexcept { return kinetic_; }
  const PropagatorConfig& config() const noexcept { return cfg_; }

  OrbitalSet step(const OrbitalSet& state, const Field& v_half, double dt) const;

  Trajectory propagate(const OrbitalSet& psi0, const std::vector<double>& times,
                       const std::vector<Field>& v_half) const;
  Trajectory propagate(const OrbitalSet& psi0, const PotentialModel& model, const DensityPath& path) const;

  /// eta(t_0) = 0.
  Trajectory propagate_inhomogeneous(const StepSource& source, const std::vector<double>& times,
                                     const std::vector<Field>& v_half) const;
  Trajectory propagate_inhomogeneous(const Trajectory& source, const std::vector<Field>& v_half) const;
  Trajectory propagate_inhomogeneous(const Trajectory& source, const PotentialModel& model,
                                     const DensityPath& path) const;

 private:
  // out = (I + i tau H)^{-1} [(I - i tau H) x + extra]
  Eigen::MatrixXcd cayley(const Eigen::MatrixXcd& x, const Field& v, double dt, const Eigen::MatrixXcd* extra) const;
  Eigen::MatrixXcd cayley_1d(const Eigen::MatrixXcd& x, const Field& v, double tau, const Eigen::MatrixXcd* extra) const;
  Eigen::MatrixXcd cayley_sparse(const Eigen::MatrixXcd& x, const Field& v, double tau,
                                 const Eigen::MatrixXcd* extra) const;

  struct SparseCache;
  Grid grid_;
  double kinetic_;
  double hbar_;
  PropagatorConfig cfg_;
  std::shared_ptr<const SparseCache> sparse_;
};

/// K: Psi* -> propagation of psi0 under the potential built from |Psi*|^2.
class FixedPointMap {
 public:
  FixedPointMap(const PotentialModel& model, Propagator propagator, OrbitalSet psi0, std::vector<double> times,
                std::optional<Field> phi_carry = std::nullopt);

  const PotentialModel& model() const noexcept { return *model_; }
  const Propagator& propagator() const noexcept { return propagator_; }
  const OrbitalSet& psi0() const noexcept { return psi0_; }
  const std::vector<double>& times() const noexcept { return times_; }
  const std::optional<Field>& phi_carry() const noexcept { return phi_carry_; }
  double window_length() const { return times_.back() - times_.front(); }

  Trajectory operator()(const Trajectory& input) const;
  DensityPath density_path(const Trajectory& input) const;
  std::vector<Field> step_potentials(const Trajectory& input) const;
  /// K applied to the zero trajectory (propagation without charge feedback).
  Trajectory zero_charge() const;
  /// Accumulated history Phi at the last knot, to seed the next window.
  std::optional<Field> phi_end(const Trajectory& solution) const;

 private:
  void check_input(const Trajectory& input) const;

  const PotentialModel* model_;
  Propagator propagator_;
  OrbitalSet psi0_;
  std::vector<double> times_;
  std::optional<Field> phi_carry_;
};

}  // namespace tdks

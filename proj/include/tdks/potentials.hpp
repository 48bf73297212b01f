#pragma once

// Effective potential V_e = V + W*rho + Phi: external families, the mollified
// Hartree convolution and a nonlocal exchange-correlation history model.
//
// Convolutions are discrete: (K*f)(x_i) = h^d sum_j K(x_i - x_j) f(x_j), with K
// sampled on the offset stencil |k_a| <= n-1. Kernel norms are taken over the
// same stencil, so the discrete Young inequalities hold exactly.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tdks/discrete_space.hpp"

namespace tdks {

/// External potential family V(x, t) >= 0.
struct ExternalPotential {
  /// zero | constant | harmonic
  std::string family = "zero";
  /// constant: V = offset; harmonic: V = offset + m omega^2 |x-c|^2 / 2 (1 + drive sin(freq t)).
  double offset = 0.0;
  double omega = 1.0;
  double drive_amplitude = 0.0;
  double drive_frequency = 0.0;
  double mass = 1.0;

  void validate() const;
  Field value(const Grid& grid, double t) const;
  /// Analytic time derivative.
  Field time_derivative(const Grid& grid, double t) const;
  bool is_static() const;
};

class ConvolutionKernel {
 public:
  ConvolutionKernel(const Grid& grid, const std::function<double(double)>& radial);

  const Grid& grid() const noexcept { return grid_; }
  Field apply(const Field& f) const;
  /// Kernel value at the lattice offset (k_0, k_1, k_2) (only the first dim entries used).
  double at_offset(const std::array<int, 3>& k) const;

  double l1_norm() const noexcept { return l1_; }
  double l2_norm() const noexcept { return l2_; }
  /// (sum_a ||D_a K||_{L1}^2)^{1/2} over stencil edges.
  double gradient_l1_norm() const noexcept { return grad_l1_; }
  double max_abs() const noexcept { return max_abs_; }

 private:
  struct Plan;
  Grid grid_;
  std::shared_ptr<const Plan> plan_;
  std::vector<double> samples_;  // on the (2n-1)^d offset box
  double l1_ = 0.0, l2_ = 0.0, grad_l1_ = 0.0, max_abs_ = 0.0;
};

struct HartreeParams {
  bool enabled = true;
  /// Mollification radius; negative selects the default 2h.
  double radius = -1.0;
  double coupling = 1.0;
};

struct XCParams {
  double coupling = 0.0;
  double width = 1.0;
};

/// Density samples on time knots. `phi_carry` holds the accumulated history
/// Phi at the first knot when the path continues an earlier window; otherwise
/// the history starts from phi0(rho(t_0)).
struct DensityPath {
  std::vector<double> times;
  std::vector<Field> rho;
  std::optional<Field> phi_carry;

  static DensityPath from_trajectory(const Trajectory& traj, std::optional<Field> carry = std::nullopt);
  static DensityPath zeros(const Grid& grid, const std::vector<double>& times,
                           std::optional<Field> carry = std::nullopt);
  /// Linear interpolation in time.
  Field at(double t) const;
};

/// Built-in nonlocal history model: phi = c (g_sigma * rho), phi0 = c (g_sigma * rho0).
class XCModel {
 public:
  XCModel(const Grid& grid, XCParams params);

  double coupling() const noexcept { return params_.coupling; }
  double width() const noexcept { return params_.width; }
  const ConvolutionKernel& kernel() const noexcept { return kernel_; }

  Field phi0(const Field& rho0) const;
  Field rate(const Field& rho) const;
  /// Upper bound for |phi| given total charge ||Psi||_{L2}^2.
  double rate_sup_bound(double charge) const;

 private:
  XCParams params_;
  ConvolutionKernel kernel_;
};

class PotentialModel {
 public:
  PotentialModel(Grid grid, ExternalPotential external, HartreeParams hartree, std::optional<XCParams> xc,
                 double hbar = 1.0, double mass = 1.0);

  const Grid& grid() const noexcept { return grid_; }
  double hbar() const noexcept { return hbar_; }
  double mass() const noexcept { return mass_; }
  double kinetic_coefficient() const noexcept { return hbar_ * hbar_ / (2.0 * mass_); }
  const ExternalPotential& external() const noexcept { return external_; }
  bool hartree_enabled() const noexcept { return hartree_params_.enabled; }
  bool xc_enabled() const noexcept { return xc_.has_value(); }
  /// True when V_e depends on rho at all.
  bool coupled() const noexcept { return hartree_enabled() || xc_enabled(); }
  double mollification_radius() const noexcept { return radius_; }
  const HartreeParams& hartree_params() const noexcept { return hartree_params_; }
  const ConvolutionKernel& hartree_kernel() const;
  const XCModel& xc() const;

  Field external_at(double t) const { return external_.value(grid_, t); }
  Field hartree(const Field& rho) const;
  /// Phi = phi0 + trapezoid of phi over [t_0, t] along the path.
  Field xc_phi(const DensityPath& path, double t) const;
  /// Phi at every knot.
  std::vector<Field> xc_phi_knots(const DensityPath& path) const;
  Field effective_potential(double t, const DensityPath& path) const;

  /// Midpoint potentials V_e(t_{n+1/2}) for every step, with the density
  /// linearly interpolated (i.e. the two-knot average) at the midpoint.
  std::vector<Field> step_potentials(const DensityPath& path) const;
  /// Rho-linear part of step_potentials for a density increment (no V). The
  /// initial history phi0(drho_0) is included unless the path carries history.
  std::vector<Field> step_potential_increments(const std::vector<double>& times, const std::vector<Field>& drho,
                                               bool with_initial_history = true) const;

  /// (dPhi/drho) applied to a product path, sampled at every knot.
  std::vector<Field> xc_derivative_apply(const DensityPath& base, const std::vector<Field>& product,
                                         bool include_initial = true) const;

 private:
  Field phi_start(const DensityPath& path) const;

  Grid grid_;
  ExternalPotential external_;
  HartreeParams hartree_params_;
  double radius_ = 0.0;
  std::optional<ConvolutionKernel> hartree_kernel_;
  std::optional<XCModel> xc_;
  double hbar_;
  double mass_;
};

}  // namespace tdks

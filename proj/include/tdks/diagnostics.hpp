#pragma once

// Checks of the identities and inequalities the iteration theory relies on.
// Every inequality check returns both sides so that failures are attributable.

#include <optional>
#include <string>
#include <vector>

#include "tdks/contraction.hpp"
#include "tdks/evolution.hpp"

namespace tdks {

struct EnergyValues {
  /// hbar^2/4m |D Psi|^2 + (W*rho/4 + (V+Phi)/2) rho, integrated.
  double script = 0.0;
  /// Physical energy E from script = (E - <W*rho, rho>/2) / 2.
  double physical = 0.0;
};

EnergyValues energy(const OrbitalSet& state, double t, const Field& phi, const PotentialModel& model);
/// Phi taken from the path history at time t.
EnergyValues energy(const OrbitalSet& state, double t, const DensityPath& path, const PotentialModel& model);

/// script_E(t_k) - script_E(t_0) - (1/2) int_0^{t_k} int (dV/ds + phi) rho, trapezoid in time.
std::vector<double> energy_identity_residual(const Trajectory& traj, const PotentialModel& model,
                                             const std::optional<Field>& phi_carry = std::nullopt);

/// sup over knots of || U1 psi0 - U2 psi0 - eta ||_H10 with
/// i hbar eta_t = H(rho1) eta + [V_e(rho1) - V_e(rho2)] U2 psi0.
double duhamel_identity_residual(const OrbitalSet& psi0, const DensityPath& rho1, const DensityPath& rho2,
                                 const PotentialModel& model, const Propagator& propagator);

struct CheckResult {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  double margin() const { return rhs - lhs; }
};

/// ||(W*(fg)) psi||_H10 <= C_lemma ||f|| ||g|| ||psi||.
CheckResult hartree_product_bound_check(const Field& f, const Field& g, const OrbitalSet& psi,
                                        const PotentialModel& model, const EmbeddingConstants& e);
/// ||[W*(rho1-rho2)] psi|| <= C_lemma ||Psi1-Psi2|| (||Psi1|| + ||Psi2||) ||psi||.
CheckResult hartree_lipschitz_check(const OrbitalSet& psi1, const OrbitalSet& psi2, const OrbitalSet& psi,
                                    const PotentialModel& model, const EmbeddingConstants& e);
/// sup_t ||[V_e(t, rho1) - V_e(t, rho2)] psi|| <= C sup||Psi1 - Psi2|| ||psi||.
CheckResult potential_lipschitz_check(const Trajectory& psi1, const Trajectory& psi2, const OrbitalSet& psi,
                                      const FixedPointMap& map, double C);
/// The sampled ratio entering potential_lipschitz_check.
double potential_lipschitz_ratio(const Trajectory& psi1, const Trajectory& psi2, const OrbitalSet& psi,
                                 const FixedPointMap& map);

struct OrderFit {
  double order = 0.0;
  double r_squared = 0.0;
  int points = 0;
};
/// Least-squares slope of log r_{k+1} against log r_k over residuals above `floor`.
OrderFit convergence_order(const std::vector<double>& residuals, double floor = 0.0);

struct FdRow {
  double eps = 0.0;
  double central_error = 0.0;
  double one_sided_error = 0.0;
};
struct FdTable {
  std::vector<FdRow> rows;
  double central_slope = 0.0;
  double one_sided_slope = 0.0;
};
/// Relative errors of difference quotients of K against K'(base)[omega].
/// Differences K(a) - K(b) are evaluated through the exact discrete Duhamel
/// relation, which avoids subtracting two nearly equal propagations.
FdTable gateaux_fd_check(const FixedPointMap& map, const Trajectory& base, const Trajectory& omega,
                         const std::vector<double>& epsilons);
/// Plain relative error of (K(base+eps w) - K(base-eps w)) / 2 eps against K'(base)[w].
double central_fd_error(const FixedPointMap& map, const Trajectory& base, const Trajectory& omega, double eps);
/// K(a) - K(b) through the discrete Duhamel relation.
Trajectory map_difference(const FixedPointMap& map, const Trajectory& a, const Trajectory& b);

struct JacobianCheck {
  double relative_frobenius = 0.0;
  Eigen::Index dofs = 0;
};
/// Dense real Jacobian of K by column finite differences vs the matrix of K' on basis vectors.
JacobianCheck dense_jacobian_check(const FixedPointMap& map, const Trajectory& base, double eps = 1e-6);

/// max_t | int rho grad Phi | (reported only).
double zero_force_value(const Trajectory& traj, const PotentialModel& model,
                        const std::optional<Field>& phi_carry = std::nullopt);

}  // namespace tdks

#pragma once

// Derivative of the fixed-point map and the exact Newton iteration.
//
// K'(Psi)[w] is the exact tangent of the discrete map: with psi_n = K(Psi)(t_n)
// and drho = 2 Re(conj(Psi) w), it solves
//   (I + i tau H_n) eta_{n+1} = (I - i tau H_n) eta_n - i tau dv_n (psi_n + psi_{n+1}),
// dv_n the rho-linear part of the step potential. This is the Duhamel integral
// (-i/hbar) int U(t,s) dv(s) U(s,0) psi0 ds of the continuous derivative with
// the orientation fixed by i hbar d/dt Psi = H Psi.

#include <optional>

#include "tdks/contraction.hpp"
#include "tdks/evolution.hpp"
#include "tdks/trace.hpp"

namespace tdks {

/// K' at a fixed base trajectory; caches K(base) and the step potentials.
class Linearization {
 public:
  Linearization(const FixedPointMap& map, Trajectory base);

  const FixedPointMap& map() const noexcept { return *map_; }
  const Trajectory& base() const noexcept { return base_; }
  /// K(base)
  const Trajectory& image() const noexcept { return image_; }

  Trajectory apply(const Trajectory& omega) const;
  int applications() const noexcept { return applications_; }

 private:
  const FixedPointMap* map_;
  Trajectory base_;
  Trajectory image_;
  std::vector<Field> v_half_;
  mutable int applications_ = 0;
};

Trajectory kprime_apply(const FixedPointMap& map, const Trajectory& base, const Trajectory& omega);

/// (2 C0 T / hbar) U_bound^2 ||Psi0|| / (1 - x) times the sup norm of the base.
double kprime_norm_bound(const ConstantsBundle& bundle, double T, double base_norm = 1.0);

struct LinearSolveResult {
  Trajectory solution;
  int iterations = 0;
  /// sup norm of the last update.
  double last_update = 0.0;
  /// Ratio of the last two updates (geometric rate of the sweep).
  double rate = 0.0;
};

/// Fixed-point sweep psi <- K'(base) psi + f until the update is <= tol.
/// Throws window_too_long when the sweep stops contracting or `bound_hint` >= 1.
LinearSolveResult solve_linearized(const Linearization& lin, const Trajectory& f, double tol, int max_iters = 500,
                                   std::optional<double> bound_hint = std::nullopt);

struct KappaSigma {
  double kappa = 0.0;
  double sigma = 0.0;
};
KappaSigma newton_constants(double c_lip, double tau, double alpha, double h, double inverse_norm_at_root);

/// max ||(I - K')^{-1} f|| / ||f|| over `samples` random f.
double estimate_inverse_norm(const Linearization& lin, int samples, Rng& rng, double tol);
/// max ||K' w|| / ||w|| over random probes refined by a few power steps.
double estimate_kprime_norm(const Linearization& lin, int probes, Rng& rng, int power_steps = 3);
/// max ||(K'(a) - K'(b)) w|| / (||a - b|| ||w||) over pairs inside the ball of the given
/// radius around `centre` (or around zero).
double estimate_derivative_lipschitz(const FixedPointMap& map, double radius, int pairs, Rng& rng,
                                     const std::optional<Trajectory>& centre = std::nullopt);
/// D1 + D2 + D3: (2 T beta U / hbar) (2 r gamma_T + U ||Psi0||).
double analytic_derivative_lipschitz(const ConstantsBundle& bundle);

struct NewtonParams {
  double h = 0.5;
  double alpha = 0.5;
  double tau = 0.5;
  double kappa = 1.0;
  double sigma = 1.0;
  int max_newton_iters = 30;
  double linearized_tol = 1e-14;
  int linearized_max_iters = 1000;
  /// Consistency is checked against this radius (the ball radius r).
  double delta = 0.0;
  /// Contraction constant q used for the ball-membership estimate ||S u0|| / (1 - q).
  double q = 0.0;
  bool enforce_preconditions = true;

  double residual_floor() const { return 10.0 * linearized_tol; }
};

struct NewtonResult {
  Trajectory solution;
  IterationTrace trace;
  /// (kappa / h sigma) (1 - sqrt(1 - 2h))^{2^k} / 2^k at the final k.
  double error_bound = 0.0;
  int inner_iterations = 0;
};

/// Error bound of the Kantorovich-type lemma after k steps.
double newton_error_bound(double kappa, double sigma, double h, int k);

NewtonResult newton_solve(const FixedPointMap& map, const Trajectory& u0, const NewtonParams& params);

}  // namespace tdks

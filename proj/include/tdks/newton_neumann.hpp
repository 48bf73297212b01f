#pragma once

// Approximate Newton iteration with truncated Neumann series inverses
// G = I + K' + ... + K'^n, the order n chosen from the current residual.

#include "tdks/newton_exact.hpp"

namespace tdks {

struct NeumannPolicy {
  double K0 = 0.0;
  double M = 1.0;
  int n_max = 64;
  /// 0 selects the adaptive rule; otherwise a fixed order.
  int fixed_n = 0;
};

/// M = max(1 / (1 - K0), c / 2).
double neumann_M(double K0, double c_lip);
/// sigma = (2 (M + M^3) / h) max(1, 1 / ((1 - alpha) delta)).
double approx_newton_sigma(double M, double h, double alpha, double delta);

Trajectory neumann_apply(const Linearization& lin, const Trajectory& f, int n);

struct Truncation {
  int n = 1;
  bool capped = false;
  /// Residual is exactly zero: the exact inverse is the limit case.
  bool exact_inverse = false;
};
/// Smallest n >= 1 with estimate^n <= residual, capped at n_max.
Truncation choose_truncation(double residual_norm, double kprime_norm_est, int n_max);

/// max over probes of ||K'^{n+1} w|| / ||w||.
double approx_inverse_defect(const Linearization& lin, int n, int probe_count, Rng& rng);

struct ApproxNewtonResult {
  Trajectory solution;
  IterationTrace trace;
  double error_bound = 0.0;
};

ApproxNewtonResult approx_newton_solve(const FixedPointMap& map, const Trajectory& u0, const NeumannPolicy& policy,
                                       const NewtonParams& params, std::uint64_t probe_seed = kDefaultSeed,
                                       int defect_probes = 3);

}  // namespace tdks

#pragma once

// Constants of the contraction argument, Picard iteration and continuation in
// time.
//
// Analytic mode bounds every quantity for the discrete scheme itself:
//  - C_lemma(K) = E1^3 ||DK||_1 + E3^2 ||K||_2 + E2^2 E1^2 ||K||_1 bounds
//    ||(K*(fg)) psi||_H1 <= C_lemma ||f|| ||g|| ||psi|| (duality split into the
//    gradient-of-w, w-times-gradient and zeroth-order terms).
//  - One Crank-Nicolson step grows the H10 norm by at most (1+x)/(1-x),
//    x = dt E1 G / (2 hbar), where G bounds ||D v||_{L3} of the step potential;
//    hence U_bound = ((1+x)/(1-x))^M.
//  - r = 2 U_bound max(||Psi0||, r0) and U_bound depends on r through G; the
//    pair is solved by fixed-point iteration.
// Empirical mode replaces C and U_bound by sampled maxima times a safety factor.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tdks/evolution.hpp"
#include "tdks/random_fields.hpp"
#include "tdks/trace.hpp"

namespace tdks {

struct EmbeddingConstants {
  double E1 = 0.0;  // H10 -> L6
  double E2 = 0.0;  // H10 -> L3
  double E3 = 0.0;  // H10 -> L4
};

/// max ||f||_p / ||f||_H10 over random, structured and power-refined trials, times `safety`.
EmbeddingConstants embedding_constants(const Grid& grid, std::uint64_t seed = kDefaultSeed, int trials = 2000,
                                       double safety = 1.2);
/// ||f||_{L^p} / ||f||_{H10} for a real Dirichlet field.
double sobolev_ratio(const Grid& grid, const Field& f, double p);

double lemma_constant(const ConvolutionKernel& kernel, const EmbeddingConstants& e);

struct ConstantsBundle {
  std::string mode = "analytic";
  EmbeddingConstants embedding;
  double hbar = 1.0;
  double window_length = 0.0;
  double dt = 0.0;
  double psi0_h10 = 0.0;
  double psi0_l2 = 0.0;

  double hartree_l1 = 0.0, hartree_l2 = 0.0, hartree_grad_l1 = 0.0;
  double lemma_hartree = 0.0;
  /// c_xc (1 + T) C_lemma(g); also the derivative bound of the history model.
  double xc_increment = 0.0;
  /// Effective C0 = lemma_hartree + xc_increment.
  double C0 = 0.0;
  /// E1^2 [E1 ||DW||_1 + |Omega|^{2/3} ||W||_2 + E1^2 |Omega|], reported for comparison.
  double C0_displayed = 0.0;
  double C = 0.0;

  double energy0 = 0.0;
  double sup_dvdt = 0.0;
  double r0 = 0.0;
  double r = 0.0;
  double potential_gradient_bound = 0.0;  // G
  double step_growth = 0.0;               // x
  double U_bound = 1.0;

  double gamma_t = 0.0;
  double q = 0.0;
  /// Directly sampled Lipschitz ratio of K (empirical mode only).
  double gamma_measured = 0.0;

  // Newton parameters.
  double tau = 0.5, alpha = 0.5, h = 0.5;
  double inverse_norm = 0.0;
  double kappa = 0.0, sigma = 0.0;
  double c_lip = 0.0;
  double c_lip_analytic = 0.0;
  double kprime_bound = 0.0;
  double kprime_measured = 0.0;
  double K0 = 0.0, M = 0.0;
  double sigma_approx = 0.0;

  std::vector<std::string> notes;
};

/// Bound on the solution-energy radius r0 (squared form solved for r0).
struct RadiusInputs {
  double energy0 = 0.0;
  double sup_dvdt = 0.0;
  double r0 = 0.0;
};
RadiusInputs solution_radius(const OrbitalSet& psi0, const PotentialModel& model, double T,
                             const std::optional<Field>& phi_carry = std::nullopt, double t0 = 0.0);

/// (r0, r) with r = 2 U_bound max(||Psi0||_H10, r0).
std::pair<double, double> ball_radius(const OrbitalSet& psi0, const PotentialModel& model, double T,
                                      double U_bound, const std::optional<Field>& phi_carry = std::nullopt,
                                      double t0 = 0.0);

/// gamma_t = (C t / hbar) U_bound^2 ||Psi0|| / (1 - x).
double contraction_constant(double t, const ConstantsBundle& bundle);

/// Analytic-mode bundle for K on the window of `map`.
ConstantsBundle analytic_constants(const FixedPointMap& map, const EmbeddingConstants& e);

struct EmpiricalOptions {
  std::uint64_t seed = kDefaultSeed;
  int pairs = 20;
  double safety = 1.2;
};
/// Empirical-mode bundle: C, U_bound and the K Lipschitz ratio from sampling inside the ball.
ConstantsBundle empirical_constants(const FixedPointMap& map, const EmbeddingConstants& e,
                                    const EmpiricalOptions& opts = {});

/// Max of ||K a - K b|| / ||a - b|| over `pairs` random pairs of sup norm <= radius.
double measure_contraction(const FixedPointMap& map, double radius, int pairs, Rng& rng);
/// Max over sampled (s, t) of the H10 growth of U(t, s) under step potentials of random ball trajectories.
double measure_propagator_norm(const FixedPointMap& map, double radius, int samples, Rng& rng);

struct PicardResult {
  Trajectory solution;
  IterationTrace trace;
  /// Iterations predicted by q^n residual_0 <= target.
  int predicted_iterations = -1;
  /// Every iterate (seed first); filled only when requested.
  std::vector<Trajectory> iterates;
};

struct PicardOptions {
  double target_residual = 1e-10;
  int max_iters = 200;
  /// Contraction estimate used for the predicted count; ignored when <= 0 or >= 1.
  double q = 0.0;
  bool keep_iterates = false;
  std::optional<Trajectory> seed;
};

/// Successive approximation from the zero-charge propagation (or the given seed).
PicardResult picard_solve(const FixedPointMap& map, const PicardOptions& opts);

using WindowSolver = std::function<std::pair<Trajectory, IterationTrace>(const FixedPointMap&)>;

struct ContinuationResult {
  Trajectory solution;
  int windows = 1;
  std::vector<IterationTrace> traces;
};

/// Smallest window count >= max(min_windows, ceil(gamma_T / cap)) that divides `steps`.
int window_count(double gamma_T, double cap, int steps, int min_windows = 1);

/// Solves [0, T] window by window, chaining terminal states and xc history.
ContinuationResult continue_in_time(const OrbitalSet& psi0, const PotentialModel& model, const Propagator& propagator,
                                    double t0, double T, int steps, int windows, const WindowSolver& solver);

}  // namespace tdks

#pragma once

// Seeded random states for audits, probes and constant estimation.
// Smooth fields are sine series with algebraically decaying coefficients, so
// their H10 norms stay bounded under refinement; rough fields are iid samples.

#include <cstdint>
#include <random>

#include "tdks/discrete_space.hpp"

namespace tdks {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t kDefaultSeed = 0x5EED;

/// Real Dirichlet field: sum of sine modes with coefficient decay (1+|k|^2)^{-decay/2}.
Field random_smooth_field(const Grid& grid, Rng& rng, int max_mode = 8, double decay = 2.0);
/// Independent standard normal samples at every grid point.
Field random_rough_field(const Grid& grid, Rng& rng);

OrbitalSet random_state(const Grid& grid, int n_orbitals, Rng& rng, bool smooth = true);
/// Same as random_state, rescaled to the given H10 norm.
OrbitalSet random_state_with_norm(const Grid& grid, int n_orbitals, Rng& rng, double h10, bool smooth = true);

/// Trajectory on the given knots whose states vary smoothly in time; sup H10 norm equals `sup_h10`.
Trajectory random_trajectory(const Grid& grid, int n_orbitals, const std::vector<double>& times, Rng& rng,
                             double sup_h10);

}  // namespace tdks

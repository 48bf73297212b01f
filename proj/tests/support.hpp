#pragma once

// Small shared fixtures for the unit tests.

#include <cmath>

#include "tdks/discrete_space.hpp"
#include "tdks/evolution.hpp"
#include "tdks/potentials.hpp"

namespace tdks::testing {

/// Two orbitals (Gaussian with a kick, first Hermite mode) centred in the box.
inline OrbitalSet two_orbitals(const Grid& g, double total = 1.0) {
  Eigen::MatrixXcd v(g.size(), 2);
  const double c = 0.5 * g.axis_length();
  for (Eigen::Index p = 0; p < g.size(); ++p) {
    const auto x = g.position(p);
    double r2 = 0.0;
    for (int a = 0; a < g.dim(); ++a) r2 += (x[a] - c) * (x[a] - c);
    const double d = x[0] - c;
    v(p, 0) = std::exp(-r2 / 2.0) * std::polar(1.0, 0.5 * d);
    v(p, 1) = d * std::exp(-r2 / 2.0);
  }
  OrbitalSet s(g, v);
  s *= total / norm(s, NormKind::L2);
  return s;
}

inline PotentialModel hartree_model(const Grid& g, double coupling, const std::string& family = "harmonic",
                                    std::optional<XCParams> xc = std::nullopt) {
  ExternalPotential ext;
  ext.family = family;
  HartreeParams hp;
  hp.coupling = coupling;
  hp.radius = 0.5;
  return PotentialModel(g, ext, hp, xc);
}

}  // namespace tdks::testing

#pragma once

// Declarative run configuration (YAML). Errors carry "file:line:col:" anchors.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdks/discrete_space.hpp"
#include "tdks/potentials.hpp"

namespace tdks {

/// amplitude * H_k((x_0 - c_0) / w) * exp(-|x - c|^2 / 2w^2) * exp(i p . x), scaled to L2 norm `norm`.
struct OrbitalSpec {
  std::vector<double> center;
  double width = 1.0;
  std::vector<double> momentum;
  int hermite = 0;
  double norm = 1.0;
};

struct Tolerances {
  double picard = 1e-12;
  /// Inner linearized solves of both Newton variants; the residual floor is 10x this.
  double linearized = 1e-14;
  double linear_solve = 1e-13;
  double unitarity = 1e-10;
  double energy = 1e-8;
  double duhamel = 1e-3;
  double duhamel_same = 1e-12;
  double fd = 1e-4;
};

struct NewtonSettings {
  double h = 0.5;
  double alpha = 0.5;
  double tau = 0.5;
  /// Radius of the ball around the root on which Newton's constants are taken; 0 uses r.
  double delta = 0.0;
  int max_iters = 30;
  int n_max = 64;
  int fixed_n = 0;
};

struct RunConfig {
  std::string source_name;
  /// FNV-1a of the config text.
  std::string config_hash;

  int dim = 1;
  int points = 128;
  double length = 10.0;
  double hbar = 1.0;
  double mass = 1.0;
  ExternalPotential external;
  HartreeParams hartree;
  std::optional<XCParams> xc;
  std::vector<OrbitalSpec> orbitals;

  double T = 1.0;
  double dt = 0.02;
  /// 0 picks the smallest divisor of the step count meeting gamma_cap.
  int windows = 1;
  double gamma_cap = 0.5;

  std::string solver = "all";
  std::string mode = "empirical";
  Tolerances tol;
  NewtonSettings newton;
  std::uint64_t seed = 0x5EED;
  int empirical_pairs = 20;
  int audit_samples = 100;
  bool plots = true;
  std::string output_dir = "out";

  int steps() const;
  Grid grid() const;
  PotentialModel model() const;
  OrbitalSet initial_state() const;
  /// Range checks that need more than one field.
  void validate() const;
};

RunConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
RunConfig load_config(const std::string& path);
std::string fnv1a_hex(const std::string& text);

}  // namespace tdks

#pragma once

// Batch runner behind the command-line tool: builds the model from a RunConfig,
// computes constants, runs the solvers window by window and the diagnostics
// suite, and writes the report, CSV traces and plots.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tdks/config.hpp"
#include "tdks/contraction.hpp"
#include "tdks/diagnostics.hpp"
#include "tdks/newton_neumann.hpp"

namespace tdks {

inline constexpr const char* kVersion = "0.1.0";

struct RunOverrides {
  std::optional<std::string> output_dir;
  std::optional<std::string> mode;
  std::optional<std::string> solver;
  std::optional<std::uint64_t> seed;
};

void apply_overrides(RunConfig& cfg, const RunOverrides& o);

/// Newton-side constants for one window, in the bundle's mode.
struct SolverSetup {
  std::string mode;
  double c_lip = 0.0;
  double K0 = 0.0;
  double inverse_norm = 1.0;
  double kappa = 0.0;
  double sigma = 0.0;
  /// NaN when K0 >= 1 (no Neumann inverse on this window).
  double M = 0.0;
  double sigma_approx = 0.0;
  double delta = 0.0;
  double q = 0.0;
};

struct SolveOutcome {
  std::string solver;
  Trajectory solution;
  IterationTrace trace;
  /// Picard steps run before a Newton variant (to residual <= 1/sigma).
  std::optional<IterationTrace> handoff;
  int predicted_iterations = -1;
  double error_bound = 0.0;
};

struct HorizonOutcome {
  Trajectory solution;
  int windows = 1;
  std::vector<SolveOutcome> per_window;
};

struct DiagnosticsReport {
  std::vector<CheckResult> checks;
  std::vector<double> energy_times;
  std::vector<double> energy_script;
  std::vector<double> energy_physical;
  double zero_force = 0.0;
  double fd_slope = 0.0;
  bool all_pass() const;
};

class Experiment {
 public:
  explicit Experiment(RunConfig cfg);
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const RunConfig& config() const noexcept { return cfg_; }
  const PotentialModel& model() const noexcept { return *model_; }
  const OrbitalSet& psi0() const noexcept { return psi0_; }
  const Propagator& propagator() const noexcept { return *propagator_; }

  /// Single-window map on [0, T / windows] from psi0.
  FixedPointMap first_window(int windows = 1) const;
  const EmbeddingConstants& embedding() const;
  ConstantsBundle constants(const FixedPointMap& map, const std::string& mode) const;
  SolverSetup setup(const FixedPointMap& map, const ConstantsBundle& bundle) const;
  SolveOutcome solve(const FixedPointMap& map, const std::string& solver, const std::string& mode) const;
  /// Resolves windows = 0 to a count meeting the gamma cap.
  int resolve_windows(const std::string& mode) const;
  HorizonOutcome solve_horizon(const std::string& solver, const std::string& mode, int windows) const;
  DiagnosticsReport diagnostics(const FixedPointMap& map, const Trajectory& solution) const;

 private:
  RunConfig cfg_;
  std::unique_ptr<PotentialModel> model_;
  OrbitalSet psi0_;
  std::unique_ptr<Propagator> propagator_;
  mutable std::optional<EmbeddingConstants> embedding_;
};

/// CLI verbs; return the process exit status.
int run_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int verify_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int constants_command(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace tdks

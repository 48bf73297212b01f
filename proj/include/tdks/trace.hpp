#pragma once

// Per-iterate records of the nonlinear solvers and their CSV form.
// Wall times are kept in memory only; the CSV omits them so that traces are
// byte-identical across runs with the same configuration and seed.

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace tdks {

struct IterationRecord {
  int iter = 0;
  /// ||S(u_k)|| = sup-in-time H10 norm of u_k - K(u_k).
  double residual = 0.0;
  /// ||u_k - u_{k-1}||; NaN for the seed iterate.
  double step_norm = std::numeric_limits<double>::quiet_NaN();
  /// Right-hand sides of the two Kantorovich checks for the step into this iterate.
  double kanone_rhs = std::numeric_limits<double>::quiet_NaN();
  double kantwo_lhs = std::numeric_limits<double>::quiet_NaN();
  double kantwo_rhs = std::numeric_limits<double>::quiet_NaN();
  /// Truncation order of the step into this iterate; 0 for exact inverses.
  int neumann_n = 0;
  double defect_measured = std::numeric_limits<double>::quiet_NaN();
  double m_times_residual = std::numeric_limits<double>::quiet_NaN();
  /// Derivative applications spent on the step into this iterate.
  int kprime_applies = 0;
  double wall_seconds = 0.0;
};

struct IterationTrace {
  std::string solver;
  std::vector<IterationRecord> records;
  bool converged = false;
  /// Residual floor below which the iteration reports convergence.
  double floor = 0.0;

  std::vector<double> residuals() const;
  int total_kprime_applies() const;
  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;
};

}  // namespace tdks

#include <stdexcept>

namespace tdks {

/// Iteration limit reached without convergence; carries the partial trace.
class nonconvergence_error : public std::runtime_error {
 public:
  nonconvergence_error(const std::string& what, IterationTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const IterationTrace& trace() const noexcept { return trace_; }

 private:
  IterationTrace trace_;
};

}  // namespace tdks

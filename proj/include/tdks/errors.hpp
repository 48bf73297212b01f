#pragma once

#include <stdexcept>
#include <string>

namespace tdks {

/// Inconsistent shapes or metadata (grid mismatch, empty trajectory, ...).
class structural_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested component is disabled or a parameter is out of range.
class configuration_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Time argument outside the supplied path.
class range_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear solve failed to reach its tolerance.
class solver_error : public std::runtime_error {
 public:
  solver_error(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A model hypothesis (nonnegativity, finiteness) is violated.
class model_violation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Newton preconditions (residual smallness, ball membership) are not met.
class consistency_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The derivative bound is >= 1 on the requested window; shrink the window.
class window_too_long : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A diagnostic could not be evaluated (e.g. too few points for a fit).
class diagnostic_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tdks

#ifndef SHIFTLAB_ERRORS_HPP
#define SHIFTLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace shiftlab {

/// Violated precondition on user-supplied data (bad coefficients, out-of-range
/// parameters, mismatched observation kinds).
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string& what) : std::invalid_argument(what) {}
};

/// A root finder or search did not converge within its iteration cap.
/// Carries the last bracket so callers can report or retry.
class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, double lo, double hi)
      : std::runtime_error(what), lo_(lo), hi_(hi) {}

  double lower() const noexcept { return lo_; }
  double upper() const noexcept { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// Ratio-form estimator with a nonpositive denominator. `raw()` is the
/// unclamped ratio (possibly infinite or NaN when the denominator is zero).
class DegenerateEstimate : public std::runtime_error {
 public:
  DegenerateEstimate(const std::string& what, double raw)
      : std::runtime_error(what), raw_(raw) {}

  double raw() const noexcept { return raw_; }

 private:
  double raw_;
};

/// Requested prior variance is infinite (weight equal to one).
class SingularVariance : public std::domain_error {
 public:
  SingularVariance(const std::string& what, int index)
      : std::domain_error(what), index_(index) {}

  int index() const noexcept { return index_; }

 private:
  int index_;
};

/// Output file could not be written.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace shiftlab

#endif

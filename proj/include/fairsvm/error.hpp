#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace fairsvm {

/// Malformed arguments, dimension mismatches, unmapped values. CLI exit code 2.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Training data cannot support the requested problem (single class, etc.).
class DegenerateProblemError : public InputError {
 public:
  using InputError::InputError;
};

/// A fairness constraint references a (group, label) cell that is empty.
class ConstraintUndefinedError : public InputError {
 public:
  using InputError::InputError;
};

enum class BindingConstraint { min_separation, equal_opportunity, joint };

inline const char* to_string(BindingConstraint b) {
  switch (b) {
    case BindingConstraint::min_separation: return "min_separation";
    case BindingConstraint::equal_opportunity: return "equal_opportunity";
    case BindingConstraint::joint: return "min_separation+equal_opportunity";
  }
  return "unknown";
}

/// No model satisfies the requested constraints. CLI exit code 3.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double max_separation,
                  BindingConstraint binding)
      : std::runtime_error(what),
        max_separation_(max_separation),
        binding_(binding) {}

  /// Supremum of |<w, u_a - u_b>| over models satisfying the other constraints.
  double max_separation() const noexcept { return max_separation_; }
  BindingConstraint binding() const noexcept { return binding_; }

 private:
  double max_separation_;
  BindingConstraint binding_;
};

/// Checksum mismatch or missing raw data. CLI exit code 4.
class DataIntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fairsvm

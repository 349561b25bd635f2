#pragma once

#include <stdexcept>

namespace ppstein {

/// Calibration target not reachable within the admissible parameter range.
class CalibrationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an estimator does not hold (e.g. a bound
/// that needs an integer-valued functional was handed a real-valued one).
class ContractViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Bad user input: configuration values, ranges, resource guards.
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace ppstein

#pragma once

#include <stdexcept>
#include <string>

namespace heatflow {

/// Base class for all errors raised by the library.
struct HeatflowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A chart point left the admissible region of the target chart.
struct ChartViolation : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// A field or section does not match the shape of its grid/base map.
struct ShapeMismatch : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// Two sections do not live over the same base map.
struct BaseMismatch : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// Time step exceeds the explicit stability bound.
struct StabilityGuard : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// Rayleigh quotient of the zero section requested.
struct ZeroSection : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// Eigensolver exhausted its iteration budget.
struct NoConvergence : HeatflowError {
  NoConvergence(const std::string& what, double best)
      : HeatflowError(what), best_residual(best) {}
  double best_residual;
};

/// Not enough stored snapshots for a time-difference check.
struct InsufficientSnapshots : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// Fit window selection produced no usable samples.
struct EmptyWindow : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// Trajectory did not reach the stop tolerance.
struct NotConverged : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// Config file is not syntactically valid JSON.
struct ParseError : HeatflowError {
  using HeatflowError::HeatflowError;
};

/// Config is valid JSON but violates the scenario schema.
struct ValidationError : HeatflowError {
  ValidationError(const std::string& fld, const std::string& reason)
      : HeatflowError(fld + ": " + reason), field(fld) {}
  std::string field;
};

}  // namespace heatflow

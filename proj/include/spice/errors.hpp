#pragma once

#include <stdexcept>
#include <string>

namespace spice {

// Bad configuration supplied by the caller (invalid K, epsilon, split sizes, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A computation produced non-finite or degenerate values.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problems reading input files (CSV, checkpoints).
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. mixing calibration results across score kinds.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace spice

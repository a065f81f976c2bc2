#pragma once

#include <stdexcept>
#include <string>

namespace jointrecon {

// Error hierarchy. The CLI maps these onto its exit codes.

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingInputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when an iterative method produces a non-finite iterate or loss.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ReportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace jointrecon

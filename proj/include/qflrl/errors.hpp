#pragma once

#include <stdexcept>
#include <string>

namespace qflrl {

/// Rejected input: a precondition on arguments or configuration failed.
struct InvalidInput : std::runtime_error {
  explicit InvalidInput(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical abort: integration blow-up, non-finite gradients, eigensolver
/// non-convergence. Maps to a distinct process exit code in the CLI.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace qflrl

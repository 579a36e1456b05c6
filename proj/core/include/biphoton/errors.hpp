#pragma once

#include <stdexcept>
#include <string>

namespace biphoton {

/// Invalid configuration, malformed file, or violated precondition.
/// CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Data-dependent analysis failure (non-convergence, degenerate counts).
/// Recoverable inside the pipeline; CLI maps it to exit code 3.
class AnalysisError : public std::runtime_error {
public:
  explicit AnalysisError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace biphoton

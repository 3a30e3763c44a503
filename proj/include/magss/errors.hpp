#pragma once

#include <stdexcept>
#include <string>

namespace magss {

// Bad dimensions, unknown names, out-of-domain parameters. Maps to exit code 2
// in the CLI.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A requested optional capability (reference sampler, mode classifier) is not
// available for the given target.
class CapabilityError : public std::runtime_error {
 public:
  explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite density, gradient, or metric value at a point.
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Geodesic integration failed (blow-up or step budget). Carries the last
// parameter value for which the curve is still valid.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& msg, double last_valid_t)
      : std::runtime_error(msg), last_valid_t(last_valid_t) {}
  double last_valid_t;
};

// Malformed input file. Carries a 1-based row number when applicable.
class IngestionError : public std::runtime_error {
 public:
  explicit IngestionError(const std::string& msg, long row = -1)
      : std::runtime_error(msg), row(row) {}
  long row;
};

class OracleError : public std::runtime_error {
 public:
  explicit OracleError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace magss

#pragma once

#include <stdexcept>
#include <string>

namespace crm {

/// Malformed or out-of-contract input (dimension mismatch, level outside (0,1), bad CSV cell).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A well-formed request the library deliberately does not handle
/// (weighted empirical VaR, composite cells marked as unsupported).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Posterior is improper for the given data (e.g. window too short).
class DegeneratePosteriorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sampler diagnostics failure (e.g. MH chain never accepted a move).
class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solver could not produce a usable answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace crm

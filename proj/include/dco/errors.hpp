#pragma once

#include <stdexcept>
#include <string>

namespace dco {

/// Bad config file, CLI usage, or missing input; maps to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An inner or outer solver did not reach its target; maps to exit code 2.
struct SolverFailure : std::runtime_error {
  explicit SolverFailure(const std::string& what, long round = -1, int agent = -1)
      : std::runtime_error(what), round(round), agent(agent) {}
  long round;
  int agent;
};

/// A structural invariant the algorithm guarantees was violated at runtime.
/// This indicates an implementation bug, not a modelling problem; exit code 3.
struct InvariantViolation : std::runtime_error {
  explicit InvariantViolation(const std::string& what, long round = -1)
      : std::runtime_error(what), round(round) {}
  long round;
};

/// Union of permutation edges does not reproduce the digraph support.
struct SupportMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Dense KKT system is not solvable.
struct SingularSystem : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dco

#pragma once

#include <stdexcept>
#include <string>

namespace klflow {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller handed us arguments outside an operation's admissible range.
struct InputError : Error {
  using Error::Error;
};

// The requested computation needs data the object cannot provide
// (e.g. a Hessian on a potential that has none).
struct CapabilityError : Error {
  using Error::Error;
};

// A precondition tying two results together was violated
// (e.g. asking for tail statistics of a trajectory that never converged).
struct ContractError : Error {
  using Error::Error;
};

// Evaluation outside a function's domain (desingularizer arguments, table
// ranges).
struct DomainError : Error {
  using Error::Error;
};

// Not enough usable samples to produce the requested estimate.
struct InsufficientDataError : Error {
  using Error::Error;
};

// Every sample fell into a degenerate set (e.g. the level set of the base
// point), so the estimate is undefined.
struct DegenerateSampleError : Error {
  using Error::Error;
};

// Requested level value is not attained along any search direction.
struct LevelNotReachedError : Error {
  using Error::Error;
};

// Distances in the requested window sit at the rounding floor; the window
// must be narrowed before a fit is meaningful.
struct RoundingFloorError : Error {
  using Error::Error;
};

// Config file problems; carries a line number when one is known.
struct ConfigError : Error {
  int line = 0;
  ConfigError(const std::string& msg, int line_ = 0)
      : Error(line_ > 0 ? "line " + std::to_string(line_) + ": " + msg : msg),
        line(line_) {}
};

}  // namespace klflow

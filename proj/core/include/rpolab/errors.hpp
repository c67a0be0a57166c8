#pragma once

#include <stdexcept>
#include <string>

namespace rpolab {

// Invalid run configuration: malformed instance, bad hyperparameter, unknown
// config key.  Maps to exit code 2 in the command-line tool.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// An iterative solver failed to converge or produced a non-finite iterate.
struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

// A solver finished but its certificate check (e.g. the duality-gap bound)
// did not hold.  Maps to exit code 3 in the command-line tool.
struct certification_error : std::runtime_error {
  explicit certification_error(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem or serialization failure.  Maps to exit code 4.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rpolab

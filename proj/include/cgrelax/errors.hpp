#pragma once

#include <stdexcept>
#include <string>

namespace cgrelax {

/// Inputs that do not fit together (mismatched spaces, malformed facets, bad dimensions).
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs that are well-formed but violate a model requirement.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The numerical engine could not produce a usable answer.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cgrelax

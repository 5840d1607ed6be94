#pragma once

#include <stdexcept>
#include <string>

namespace plastopt {

// Thrown on invalid constitutive states (singular deformation, no
// positive-definite cubic root, consistency solver failure).
class NumericsError : public std::runtime_error {
 public:
  explicit NumericsError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when the global solve cannot reach the requested load level.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on invalid run configurations; carries one message per offense.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace plastopt

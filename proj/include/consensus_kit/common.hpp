#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace consensus_kit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Malformed input: bad probabilities, self-loops, non-stochastic matrices...
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operand shapes do not line up.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A graph-based criterion was asked about a disconnected graph.
class NotConnected : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A criterion was called outside its domain (e.g. a single-input test on m > 1).
class PreconditionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// B'PB lost numerical invertibility inside a Riccati-type computation.
class SingularInnovation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operator would exceed the dense-assembly size guard.
class SizeLimitExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace consensus_kit

#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace flownet {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IntMatrix = Eigen::MatrixXi;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad topology, parameters outside their admissible set,
/// inconsistent boundary conditions or controller assignments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A value fell outside the domain of a constitutive law (tabulated range,
/// non-invertible flow, capacitive range).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Integration or rollout blew up, or the step size violates the explicit
/// stability bound.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// An iterative solve ran out of iterations.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A linear system is singular: floating dynamic node, non-invertible A_K,
/// flow terminal without an invertible incident law.
class SingularError : public Error {
 public:
  using Error::Error;
};

/// Document or CSV syntax errors.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace flownet

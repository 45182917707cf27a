#ifndef HETVR_TYPES_HPP
#define HETVR_TYPES_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hetvr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = std::size_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented mathematical precondition does not hold (bad constants,
/// violated parameter inequalities, unsupported problem structure).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// A user-facing configuration could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hetvr

#endif  // HETVR_TYPES_HPP

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace vecdenoise {

// Row-major so that one row == one word vector is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Error hierarchy. The CLI maps each kind onto a distinct exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files, dimension mismatches, missing paths.
class DataError : public Error {
 public:
  using Error::Error;
};

// Bad command line or config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses, diverging solvers.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace vecdenoise

#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace kippo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Violated API precondition (caller bug).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Incompatible tensor/layer dimensions.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bad configuration file, key, or value.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value detected during training; the run must stop.
struct NanAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A referenced run, file, or cell does not exist.
struct MissingInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed checkpoint or data file.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string shape_str(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

inline std::string shape_str(const Matrix& m) { return shape_str(m.rows(), m.cols()); }

}  // namespace kippo

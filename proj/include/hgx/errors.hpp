#pragma once

#include <stdexcept>
#include <string>

namespace hgx {

/// Shapes of operands do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data (hypergraph, dataset file, masks) violates an invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A hyperparameter or flag is out of range or unknown.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iteration limit, degenerate spectrum, or zero pivot.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The operation needs a connected hypergraph (unique stationary state).
class DisconnectedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace hgx

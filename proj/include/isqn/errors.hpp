#pragma once

#include <stdexcept>

namespace isqn {

/// Shapes, hyperparameters or documents that cannot describe a valid setup.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NaN or infinity showed up where only finite values are allowed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An API was called outside its contract (wrong mode, bad index, ...).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace isqn

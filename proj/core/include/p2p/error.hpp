#pragma once

#include <stdexcept>
#include <string>

namespace p2p {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or architecture settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input files and records.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf values, degenerate statistics, diverging training.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace p2p

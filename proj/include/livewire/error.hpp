#pragma once

#include <stdexcept>
#include <string>

namespace livewire {

/// Base of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or schedule misconfiguration. Maps to CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or invalid checkpoint / data file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch between batches, traces and networks.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered during propagation or optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace livewire

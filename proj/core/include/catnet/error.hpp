// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace catnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes passed to an op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value was produced, or a numerically undefined quantity was requested.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data or a violated record invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace catnet

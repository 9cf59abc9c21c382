// Copyright 2026 The sparsecal Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sparsecal {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents do not line up (matmul inner dims, mask vs weight, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation parameter is out of range (stride 0, kernel larger than input).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Mathematical domain violation, e.g. log of a non-positive entry.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf where finite values are required, or a diverging optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Optimization blew up (loss NaN or far above its starting value).
class DivergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Invalid user configuration (bad flag values, missing files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sparsecal

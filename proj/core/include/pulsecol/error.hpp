// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace pulsecol {

/// Base class for every error raised by the library.
class Error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Shape mismatch, non-finite values, or otherwise malformed inputs.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A dense mask with an empty row or a shape that does not match its inputs.
class InvalidMask : public Error {
 public:
  using Error::Error;
};

/// Sparse index out of range or not strictly increasing within a row.
class InvalidIndex : public Error {
 public:
  using Error::Error;
};

/// Sparsity / top-k / refresh budgets that cannot be honored.
class InvalidBudget : public Error {
 public:
  using Error::Error;
};

}  // namespace pulsecol

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vprompt {

// Error taxonomy shared by every module. The CLI maps each class onto an exit
// code: ValidationError -> 1, IoError -> 2, NumericError -> 3.

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace vprompt

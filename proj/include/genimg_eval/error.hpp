/*
 * Copyright 2026 The genimg-eval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace genimg_eval {

inline constexpr const char* kToolVersion = "0.1.0";

// Process exit codes shared by every command.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 2,
  kNumerical = 3,
};

// Bad input: malformed files, contract violations, unknown labels.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File could not be read or written.
class IoError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Numerics failed: non-convergent eigensolve, corrupted covariance,
// degenerate reference distance.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative eigensolve hit its iteration cap.
class ConvergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace genimg_eval

// Copyright 2026 The haren Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace haren {

// Every failure raised by the library derives from Error so callers (the CLI
// in particular) can map it to a nonzero exit status with one handler.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand extents disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A numeric argument is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Precondition on the caller violated (empty input, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Out-of-range values inside otherwise well-formed data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Inconsistent run or model configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// CTC input/target length pair admits no alignment.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A loss or gradient went non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A statistical test is undefined for the given data (zero marginal).
class UndefinedTestError : public Error {
 public:
  using Error::Error;
};

}  // namespace haren

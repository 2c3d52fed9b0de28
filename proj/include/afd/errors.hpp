/*
 * Copyright 2026 The AFD Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
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

namespace afd {

// Root of every error thrown by the library. The CLI maps each subclass to
// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or argument (invalid params, out-of-range factor, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data could not be used: missing/unsupported/corrupt files, bad
// directory layouts, silent clips where a level is required.
class DataError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public DataError {
 public:
  using DataError::DataError;
};

class CorruptFileError : public DataError {
 public:
  using DataError::DataError;
};

// A statistic that has no value for the given input (rms of nothing, SNR of
// a silent clip).
class UndefinedStatisticError : public DataError {
 public:
  using DataError::DataError;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace afd

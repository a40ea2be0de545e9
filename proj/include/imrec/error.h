/*
 * Copyright 2026 The imrec Authors.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace imrec {

using Index = std::ptrdiff_t;

// Base class for every error raised by the library. The CLI maps the
// subclasses onto stable exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed textual input (TSV lines, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input that violates a documented precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Context or item id outside the model / dataset bounds.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Singular systems, non-finite gradients and similar numeric failures.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Corrupt or incompatible persisted model files.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace imrec

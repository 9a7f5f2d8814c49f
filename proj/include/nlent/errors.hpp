/*
 * Copyright 2026 The nlent Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
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

namespace nlent {

// Every library failure derives from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violated by a caller-supplied value.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// The finite-difference oracle evaluated a non-finite function value.
class OracleFailure : public Error {
 public:
  using Error::Error;
};

// Malformed binary input (IDX, feature cache).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Malformed or unknown experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss, gradient or parameter.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlent

// Copyright 2026 The smarthome-qa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace shqa {

// Base of every domain error raised by the library. The CLI maps these to
// exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input: bad JSON line, unknown export format, bad CSV row.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A value breaks a documented invariant or an operation's precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// State changed underneath the caller (e.g. record already decided).
class ConflictError : public Error {
 public:
  using Error::Error;
};

// Remote endpoint could not be reached or kept failing after retries.
class EndpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace shqa

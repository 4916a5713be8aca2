// Copyright 2026 The synthneg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SYNTHNEG_ERROR_HPP_
#define SYNTHNEG_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace synthneg {

// Every error raised by the library derives from Error. The C API maps each
// subclass onto one status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument, shape mismatch, violated precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed checkpoint, scene file or config file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Non-finite value in a checked computation (NaN loss, overflowing logits).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace synthneg

#endif  // SYNTHNEG_ERROR_HPP_

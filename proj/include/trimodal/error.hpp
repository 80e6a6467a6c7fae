// Copyright 2026-present the trimodal authors
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

namespace trimodal {

/// Base of all library errors. The exit code maps onto the CLI contract:
/// 1 usage, 2 data, 3 numeric.
class Error : public std::runtime_error {
 public:
  Error(int exit_code, const std::string& what)
      : std::runtime_error(what), exit_code_(exit_code) {}

  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(1, what) {}
};

/// Malformed input, shape mismatches, I/O and format failures.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(2, what) {}
};

/// Non-finite losses, activations or gradients.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(3, what) {}
};

/// Rethrows `e` as the same error class with `prefix` prepended to the message.
[[noreturn]] inline void rethrow_with_prefix(const Error& e, const std::string& prefix) {
  const std::string what = prefix + e.what();
  switch (e.exit_code()) {
    case 1:
      throw UsageError(what);
    case 2:
      throw DataError(what);
    case 3:
      throw NumericError(what);
    default:
      throw Error(e.exit_code(), what);
  }
}

}  // namespace trimodal

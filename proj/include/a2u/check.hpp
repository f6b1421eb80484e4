/* Copyright (c) 2026 The a2u-lab Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#ifndef A2U_CHECK_HPP_
#define A2U_CHECK_HPP_

#include <sstream>
#include <stdexcept>
#include <string>

namespace a2u {

/// Contract violation: bad shapes, bad configs, bad arguments.
class CheckError : public std::invalid_argument {
 public:
  explicit CheckError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Numerical failure: NaN/Inf produced, divergence, tolerance breach.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File-level failure: missing, truncated or malformed data on disk.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace a2u

#define A2U_CHECK(cond, msg)                           \
  do {                                                 \
    if (!(cond)) {                                     \
      std::ostringstream oss_a2u_;                     \
      oss_a2u_ << "check failed (" #cond "): " << msg; \
      throw ::a2u::CheckError(oss_a2u_.str());         \
    }                                                  \
  } while (0)

#endif  // A2U_CHECK_HPP_

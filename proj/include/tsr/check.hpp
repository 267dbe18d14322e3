// include/tsr/check.hpp

// Copyright 2026  TSR Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABILITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TSR_CHECK_HPP_
#define TSR_CHECK_HPP_

#include <sstream>
#include <stdexcept>
#include <string>

namespace tsr {

// Thrown for malformed inputs, configs, and contract violations the caller
// could have avoided. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Thrown for failures during execution (I/O, numeric blow-ups, missing
// artifacts). The CLI maps this to exit code 3.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tsr

// Contract checks. Messages should start with a stable snake_case token so
// tests can match on it, e.g. TSR_CHECK(ok, "signal_too_short: need " << n).
#define TSR_CHECK(cond, msg)                      \
  do {                                            \
    if (!(cond)) {                                \
      std::ostringstream oss_;                    \
      oss_ << msg;                                \
      throw ::tsr::ValidationError(oss_.str());   \
    }                                             \
  } while (0)

#define TSR_FAIL(msg)                             \
  do {                                            \
    std::ostringstream oss_;                      \
    oss_ << msg;                                  \
    throw ::tsr::RuntimeFailure(oss_.str());      \
  } while (0)

#define TSR_REQUIRE_RUNTIME(cond, msg)            \
  do {                                            \
    if (!(cond)) TSR_FAIL(msg);                   \
  } while (0)

#endif  // TSR_CHECK_HPP_

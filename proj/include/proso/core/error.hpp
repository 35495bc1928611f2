// Copyright (c) 2026 proso authors
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

#ifndef PROSO_CORE_ERROR_HPP_
#define PROSO_CORE_ERROR_HPP_

#include <sstream>
#include <stdexcept>
#include <string>

namespace proso {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or stream.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed input violating a domain constraint.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A requested capability (e.g. an encoder provider) is not available.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Bad command-line usage; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void cat_into(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  cat_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  detail::cat_into(os, args...);
  return os.str();
}

}  // namespace proso

#endif  // PROSO_CORE_ERROR_HPP_

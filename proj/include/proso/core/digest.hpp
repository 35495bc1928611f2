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

#ifndef PROSO_CORE_DIGEST_HPP_
#define PROSO_CORE_DIGEST_HPP_

#include <cstdint>
#include <cstring>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>

#include "proso/core/matrix.hpp"

namespace proso {

// FNV-1a over raw bytes; used for checkpoint config hashes and the stage-1
// freeze contract.
class Digest {
 public:
  Digest& bytes(const void* p, size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h_ ^= c[i];
      h_ *= 0x100000001b3ull;
    }
    return *this;
  }

  Digest& str(std::string_view s) { return bytes(s.data(), s.size()); }

  Digest& matrix(const Matrix& m) {
    bytes(&m.rows, sizeof(m.rows));
    bytes(&m.cols, sizeof(m.cols));
    return bytes(m.data.data(), m.data.size() * sizeof(double));
  }

  uint64_t value() const { return h_; }

  std::string hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h_;
    return os.str();
  }

 private:
  uint64_t h_ = 0xcbf29ce484222325ull;
};

}  // namespace proso

#endif  // PROSO_CORE_DIGEST_HPP_

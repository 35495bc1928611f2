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

#ifndef PROSO_CORE_RNG_HPP_
#define PROSO_CORE_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace proso {

// Deterministic random source. All distributions are hand-rolled on top of
// mt19937_64 output so that streams are identical across platforms and
// standard-library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  int range(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  bool chance(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Derives an independent stream for a named purpose (and optional index),
  // so adding a consumer never shifts another consumer's draws.
  static uint64_t derive(uint64_t seed, std::string_view purpose, uint64_t index = 0) {
    uint64_t h = 0xcbf29ce484222325ull ^ seed;
    auto mix = [&h](uint64_t v) {
      h ^= v;
      h *= 0x100000001b3ull;
      h ^= h >> 29;
      h *= 0xbf58476d1ce4e5b9ull;
      h ^= h >> 32;
    };
    for (char c : purpose) mix(static_cast<uint64_t>(static_cast<unsigned char>(c)));
    mix(index);
    return h;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace proso

#endif  // PROSO_CORE_RNG_HPP_

/*
 * Copyright 2026 The osslab Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "osslab/rng.hpp"

#include <array>

namespace osslab {

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Rng make_stream(std::uint64_t master_seed, std::string_view name) {
  std::uint64_t state = mix64(master_seed ^ fnv1a(name));
  std::array<std::uint32_t, 8> words{};
  for (auto& w : words) {
    state = mix64(state);
    w = static_cast<std::uint32_t>(state >> 32);
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

double uniform_open_closed(Rng& rng) {
  // 53 random bits mapped to {1, ..., 2^53} / 2^53.
  const std::uint64_t bits = (rng() >> 11) + 1;
  return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace osslab

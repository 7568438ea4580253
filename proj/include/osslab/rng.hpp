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

#ifndef OSSLAB_RNG_HPP_
#define OSSLAB_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace osslab {

using Rng = std::mt19937_64;

// Named random streams derived from one master seed. Each consumer (data,
// augmentation, masks, init, ...) draws from its own stream, so disabling one
// consumer never shifts the numbers another one sees.
Rng make_stream(std::uint64_t master_seed, std::string_view name);

// SplitMix64 finalizer; also used for hashing configs and masks.
std::uint64_t mix64(std::uint64_t x);

// FNV-1a over bytes.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);

// Uniform draw on (0, 1].
double uniform_open_closed(Rng& rng);

}  // namespace osslab

#endif  // OSSLAB_RNG_HPP_

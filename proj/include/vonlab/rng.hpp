/*
 * Copyright 2026 The vonlab Authors.
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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "vonlab/tensor.hpp"

namespace vonlab {

// Philox4x32-10 block function. Exposed for tests.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Counter-based generator with a 64-bit key and a 128-bit counter (hi, lo).
//
// Every draw consumes exactly one counter value: draw k of a stream positioned
// at (hi, lo) is a pure function of (key, hi, lo + k). Streams that differ in
// `hi` never overlap, which is how per-(step, device, sample) noise is laid out.
class Rng {
 public:
  explicit Rng(std::uint64_t key = 0, std::uint64_t counter_hi = 0, std::uint64_t counter_lo = 0)
      : key_(key), hi_(counter_hi), lo_(counter_lo) {}

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter_hi() const noexcept { return hi_; }
  std::uint64_t counter_lo() const noexcept { return lo_; }

  // Independent stream with a key derived from (key, id) and a zero counter.
  Rng split(std::uint64_t id) const;
  // Same key, counter repositioned.
  Rng at(std::uint64_t counter_hi, std::uint64_t counter_lo = 0) const { return Rng(key_, counter_hi, counter_lo); }

  std::array<std::uint32_t, 4> next_block();
  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  // Box-Muller, cosine branch only; one counter per draw.
  double gaussian();
  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  std::vector<double> gaussian_vector(std::size_t n);

  bool operator==(const Rng&) const = default;

 private:
  std::uint64_t key_;
  std::uint64_t hi_;
  std::uint64_t lo_;
};

// n standard-normal draws as a rank-1 tensor; advances the counter by n.
Tensor rng_gaussian(Rng& rng, std::size_t n);

// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n);

}  // namespace vonlab

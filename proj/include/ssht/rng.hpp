/**
 * Copyright 2026 The SSHT Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <random>

namespace ssht {

using Rng = std::mt19937_64;

/// Independent generator streams derived from one seed, one per purpose, so
/// that consuming numbers in one stream never shifts another.
enum class Stream : std::uint32_t {
  kInit = 1,
  kData = 2,
  kSplit = 3,
  kLabeledAug = 4,
  kWeakAug = 5,
  kStrongAug = 6,
  kBatching = 7,
  kEval = 8,
};

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(substream),
                    static_cast<std::uint32_t>(substream >> 32)};
  return Rng(seq);
}

}  // namespace ssht

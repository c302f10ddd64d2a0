// Copyright 2026 The atlas-nas Authors.
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

#ifndef ATLAS_RNG_HPP_
#define ATLAS_RNG_HPP_

#include <cstdint>
#include <span>
#include <string_view>

namespace atlas {

/// splitmix64 output function. Update rule (Steele, Lea & Flood 2014):
///   x += 0x9E3779B97F4A7C15
///   z = x; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///          z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return  z ^ (z >> 31)
/// Used for seeding and for deriving per-entity seed streams; any
/// reimplementation in another language must reproduce it bit-for-bit.
std::uint64_t splitmix64(std::uint64_t& state);

/// Combines a base seed with a sequence of tags into a derived seed.
/// Defined as repeated splitmix64 absorption: state starts at `seed`,
/// and every tag is xor-ed in before one splitmix64 step.
std::uint64_t derive_seed(std::uint64_t seed, std::span<const std::uint64_t> tags);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// String tag variant: the bytes are packed little-endian into 64-bit
/// words (zero padded), followed by one word holding the byte length,
/// and absorbed like the tag sequence above.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// xoshiro256** 1.0 (Blackman & Vigna). All randomness in this project
/// flows through this generator so that seeded runs reproduce across
/// platforms and language ports. State is seeded from splitmix64.
///
/// Update rule:
///   result = rotl(s[1] * 5, 7) * 9
///   t = s[1] << 17
///   s[2] ^= s[0]; s[3] ^= s[1]; s[1] ^= s[2]; s[0] ^= s[3]; s[2] ^= t
///   s[3] = rotl(s[3], 45)
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random mantissa bits: (next_u64() >> 11) * 2^-53.
  double uniform();

  /// Uniform integer in [0, bound). bound must be > 0. Unbiased via rejection.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via Box-Muller on two uniform draws; the second
  /// value of each pair is cached, so draws come in deterministic pairs.
  double normal();

 private:
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace atlas

#endif  // ATLAS_RNG_HPP_
